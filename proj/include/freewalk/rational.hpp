#pragma once

#include <string>
#include <string_view>

#include <boost/multiprecision/cpp_int.hpp>

#include "freewalk/errors.hpp"

namespace freewalk {

using BigInt = boost::multiprecision::cpp_int;
using Rational = boost::multiprecision::cpp_rational;

namespace detail {

// cpp_int would read a leading 0 as an octal prefix; decimal digit strings
// need it stripped.
inline BigInt parse_decimal_int(std::string_view s) {
    bool negative = false;
    if (!s.empty() && (s[0] == '+' || s[0] == '-')) {
        negative = s[0] == '-';
        s.remove_prefix(1);
    }
    if (s.empty() || s.find_first_not_of("0123456789") != std::string_view::npos)
        throw InputError("not a decimal integer: '" + std::string(s) + "'");
    while (s.size() > 1 && s[0] == '0') s.remove_prefix(1);
    BigInt v{std::string(s)};
    if (negative) v = -v;
    return v;
}

} // namespace detail

/// Parses "p/q", a plain integer, or a decimal like "0.25" (kept exact).
inline Rational parse_rational(std::string_view s) {
    try {
        if (auto slash = s.find('/'); slash != std::string_view::npos) {
            BigInt num = detail::parse_decimal_int(s.substr(0, slash));
            BigInt den = detail::parse_decimal_int(s.substr(slash + 1));
            if (den == 0) throw InputError("rational with zero denominator: " + std::string(s));
            return Rational(num, den);
        }
        if (auto dot = s.find('.'); dot != std::string_view::npos) {
            std::string digits = std::string(s.substr(0, dot)) + std::string(s.substr(dot + 1));
            std::size_t frac_len = s.size() - dot - 1;
            BigInt num = detail::parse_decimal_int(digits);
            BigInt den = 1;
            for (std::size_t i = 0; i < frac_len; ++i) den *= 10;
            return Rational(num, den);
        }
        return Rational(detail::parse_decimal_int(s));
    } catch (const InputError&) {
        throw;
    } catch (const std::exception& e) {
        throw InputError("cannot parse rational '" + std::string(s) + "': " + e.what());
    }
}

inline std::string format_rational(const Rational& q) {
    BigInt num = boost::multiprecision::numerator(q);
    BigInt den = boost::multiprecision::denominator(q);
    if (den == 1) return num.str();
    return num.str() + "/" + den.str();
}

inline double to_double(const Rational& q) { return q.template convert_to<double>(); }

} // namespace freewalk
