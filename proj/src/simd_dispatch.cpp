#include "cmred/simd.hpp"

#include <cstdlib>
#include <string>

namespace cmred::simd {

namespace {

const Ops* pick_default()
{
    if (const char* env = std::getenv("CMRED_SIMD")) {
        std::string want(env);
        if (want == "scalar")
            return &scalar_ops;
        if (want == "avx2" && avx2_ops_or_null())
            return avx2_ops_or_null();
        if (want == "neon" && neon_ops_or_null())
            return neon_ops_or_null();
        // unknown or unavailable: fall through to autodetect
    }
    if (const Ops* o = avx2_ops_or_null())
        return o;
    if (const Ops* o = neon_ops_or_null())
        return o;
    return &scalar_ops;
}

const Ops*& active()
{
    static const Ops* a = pick_default();
    return a;
}

} // namespace

const Ops& ops() { return *active(); }

const char* backend_name() { return active()->name; }

bool select_backend(std::string_view name)
{
    if (name == "scalar") {
        active() = &scalar_ops;
        return true;
    }
    if (name == "avx2") {
        if (const Ops* o = avx2_ops_or_null()) {
            active() = o;
            return true;
        }
        return false;
    }
    if (name == "neon") {
        if (const Ops* o = neon_ops_or_null()) {
            active() = o;
            return true;
        }
        return false;
    }
    return false;
}

} // namespace cmred::simd
