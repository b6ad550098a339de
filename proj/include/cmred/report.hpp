#pragma once
// Deterministic report emission: a small ordered JSON writer (doubles always
// printed with 17 significant digits, so identical runs are byte-identical)
// and the CSV column contracts.

#include "cmred/phasespace.hpp"

#include <memory>
#include <ostream>
#include <string>
#include <variant>
#include <vector>

namespace cmred {

class Json {
public:
    using Object = std::vector<std::pair<std::string, Json>>;
    using Array = std::vector<Json>;

    Json() : v_(nullptr) {}
    Json(std::nullptr_t) : v_(nullptr) {}
    Json(bool b) : v_(b) {}
    Json(double d) : v_(d) {}
    Json(int i) : v_(double(i)) {}
    Json(long long i) : v_(double(i)) {}
    Json(std::size_t i) : v_(double(i)) {}
    Json(const char* s) : v_(std::string(s)) {}
    Json(std::string s) : v_(std::move(s)) {}
    Json(Array a) : v_(std::move(a)) {}
    Json(Object o) : v_(std::move(o)) {}

    static Json array(Array a = {}) { return Json(std::move(a)); }
    static Json object(Object o = {}) { return Json(std::move(o)); }

    // object append (keeps insertion order)
    Json& set(const std::string& key, Json value);
    Json& push(Json value); // array append

    void write(std::ostream& os, int indent = 0) const;
    std::string dump() const;

    static Json complex_value(cplx z)
    {
        return object({{"re", Json(z.real())}, {"im", Json(z.imag())}});
    }

private:
    std::variant<std::nullptr_t, bool, double, std::string, Array, Object> v_;
};

std::string format_double(double d); // %.17g

// CSV contracts
// trajectory: t, Re x_1.., Im x_1.., ||x_t||_X
void write_trajectory_csv(std::ostream& os, const Trajectory& tr, std::size_t stride = 1);
// segment: theta, Re x_1.., Im x_1..
void write_segment_csv(std::ostream& os, const Segment& seg, std::size_t stride = 1);

void write_file(const std::string& path, const std::string& contents);

} // namespace cmred
