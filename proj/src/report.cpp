#include "cmred/report.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace cmred {

std::string format_double(double d)
{
    if (std::isnan(d))
        return "\"nan\"";
    if (std::isinf(d))
        return d > 0 ? "\"inf\"" : "\"-inf\"";
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", d);
    return buf;
}

Json& Json::set(const std::string& key, Json value)
{
    if (!std::holds_alternative<Object>(v_))
        v_ = Object{};
    std::get<Object>(v_).emplace_back(key, std::move(value));
    return *this;
}

Json& Json::push(Json value)
{
    if (!std::holds_alternative<Array>(v_))
        v_ = Array{};
    std::get<Array>(v_).push_back(std::move(value));
    return *this;
}

namespace {

void write_escaped(std::ostream& os, const std::string& s)
{
    os << '"';
    for (char c : s) {
        switch (c) {
        case '"': os << "\\\""; break;
        case '\\': os << "\\\\"; break;
        case '\n': os << "\\n"; break;
        case '\t': os << "\\t"; break;
        default: os << c;
        }
    }
    os << '"';
}

void indent_to(std::ostream& os, int n)
{
    for (int i = 0; i < n; ++i)
        os << ' ';
}

} // namespace

void Json::write(std::ostream& os, int indent) const
{
    if (std::holds_alternative<std::nullptr_t>(v_)) {
        os << "null";
    } else if (std::holds_alternative<bool>(v_)) {
        os << (std::get<bool>(v_) ? "true" : "false");
    } else if (std::holds_alternative<double>(v_)) {
        os << format_double(std::get<double>(v_));
    } else if (std::holds_alternative<std::string>(v_)) {
        write_escaped(os, std::get<std::string>(v_));
    } else if (std::holds_alternative<Array>(v_)) {
        const auto& a = std::get<Array>(v_);
        if (a.empty()) {
            os << "[]";
            return;
        }
        os << "[\n";
        for (std::size_t i = 0; i < a.size(); ++i) {
            indent_to(os, indent + 2);
            a[i].write(os, indent + 2);
            os << (i + 1 < a.size() ? ",\n" : "\n");
        }
        indent_to(os, indent);
        os << ']';
    } else {
        const auto& o = std::get<Object>(v_);
        if (o.empty()) {
            os << "{}";
            return;
        }
        os << "{\n";
        for (std::size_t i = 0; i < o.size(); ++i) {
            indent_to(os, indent + 2);
            write_escaped(os, o[i].first);
            os << ": ";
            o[i].second.write(os, indent + 2);
            os << (i + 1 < o.size() ? ",\n" : "\n");
        }
        indent_to(os, indent);
        os << '}';
    }
}

std::string Json::dump() const
{
    std::ostringstream ss;
    write(ss);
    ss << '\n';
    return ss.str();
}

void write_trajectory_csv(std::ostream& os, const Trajectory& tr, std::size_t stride)
{
    const std::size_t m = tr.dim();
    os << "t";
    for (std::size_t c = 0; c < m; ++c)
        os << ",re_x" << (c + 1);
    for (std::size_t c = 0; c < m; ++c)
        os << ",im_x" << (c + 1);
    os << ",seg_norm\n";
    Segment seg(tr.grid(), m);
    for (std::size_t j = 0; j <= tr.steps(); j += stride) {
        tr.segment_at(j, seg);
        char buf[40];
        std::snprintf(buf, sizeof(buf), "%.17g", tr.time_at(j));
        os << buf;
        for (std::size_t c = 0; c < m; ++c) {
            std::snprintf(buf, sizeof(buf), "%.17g", tr.plane(c)[j].real());
            os << ',' << buf;
        }
        for (std::size_t c = 0; c < m; ++c) {
            std::snprintf(buf, sizeof(buf), "%.17g", tr.plane(c)[j].imag());
            os << ',' << buf;
        }
        std::snprintf(buf, sizeof(buf), "%.17g", segment_norm(seg));
        os << ',' << buf << '\n';
    }
}

void write_segment_csv(std::ostream& os, const Segment& seg, std::size_t stride)
{
    const std::size_t m = seg.dim();
    os << "theta";
    for (std::size_t c = 0; c < m; ++c)
        os << ",re_x" << (c + 1);
    for (std::size_t c = 0; c < m; ++c)
        os << ",im_x" << (c + 1);
    os << '\n';
    char buf[40];
    for (std::size_t k = 0; k < seg.nodes(); k += stride) {
        std::snprintf(buf, sizeof(buf), "%.17g", -double(k) * seg.grid().h);
        os << buf;
        for (std::size_t c = 0; c < m; ++c) {
            std::snprintf(buf, sizeof(buf), "%.17g", seg.at(c, k).real());
            os << ',' << buf;
        }
        for (std::size_t c = 0; c < m; ++c) {
            std::snprintf(buf, sizeof(buf), "%.17g", seg.at(c, k).imag());
            os << ',' << buf;
        }
        os << '\n';
    }
}

void write_file(const std::string& path, const std::string& contents)
{
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw std::runtime_error("cannot write " + path);
    out << contents;
}

} // namespace cmred
