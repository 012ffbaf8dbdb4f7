#pragma once

#include <cmath>
#include <cstddef>
#include <numeric>
#include <string>
#include <vector>

#include "fedsim/error.hpp"

namespace fedsim {

struct LayerShape {
    std::string name;
    std::vector<std::size_t> dims;

    std::size_t count() const {
        std::size_t n = 1;
        for (std::size_t d : dims) n *= d;
        return n;
    }

    bool operator==(const LayerShape&) const = default;
};

using ShapeMap = std::vector<LayerShape>;

inline std::size_t total_count(const ShapeMap& shape) {
    std::size_t n = 0;
    for (const auto& l : shape) n += l.count();
    return n;
}

// Flat parameter/gradient/update vector plus the layer decomposition of the
// flat layout. Two ParamVectors are combinable only when shape maps match.
struct ParamVector {
    std::vector<double> values;
    ShapeMap shape;

    ParamVector() = default;
    explicit ParamVector(ShapeMap s) : values(total_count(s), 0.0), shape(std::move(s)) {}

    std::size_t size() const { return values.size(); }

    // Offset of a named layer in the flat array.
    std::size_t offset_of(const std::string& name) const {
        std::size_t off = 0;
        for (const auto& l : shape) {
            if (l.name == name) return off;
            off += l.count();
        }
        throw Error(ErrorCategory::Structure, "no layer named '" + name + "' in shape map");
    }

    bool operator==(const ParamVector&) const = default;
};

inline bool same_shape(const ParamVector& a, const ParamVector& b) {
    return a.shape == b.shape;
}

inline void require_same_shape(const ParamVector& a, const ParamVector& b, const char* what) {
    if (!same_shape(a, b))
        throw Error(ErrorCategory::Structure, std::string(what) + ": shape maps differ");
}

inline ParamVector& operator+=(ParamVector& a, const ParamVector& b) {
    require_same_shape(a, b, "operator+=");
    for (std::size_t i = 0; i < a.values.size(); ++i) a.values[i] += b.values[i];
    return a;
}

inline ParamVector& operator-=(ParamVector& a, const ParamVector& b) {
    require_same_shape(a, b, "operator-=");
    for (std::size_t i = 0; i < a.values.size(); ++i) a.values[i] -= b.values[i];
    return a;
}

inline ParamVector& operator*=(ParamVector& a, double s) {
    for (double& v : a.values) v *= s;
    return a;
}

inline ParamVector operator+(ParamVector a, const ParamVector& b) { return a += b; }
inline ParamVector operator-(ParamVector a, const ParamVector& b) { return a -= b; }
inline ParamVector operator*(ParamVector a, double s) { return a *= s; }
inline ParamVector operator*(double s, ParamVector a) { return a *= s; }

inline ParamVector operator-(ParamVector a) {
    for (double& v : a.values) v = -v;
    return a;
}

inline double dot(const ParamVector& a, const ParamVector& b) {
    require_same_shape(a, b, "dot");
    double s = 0.0;
    for (std::size_t i = 0; i < a.values.size(); ++i) s += a.values[i] * b.values[i];
    return s;
}

inline double norm(const ParamVector& a) {
    double s = 0.0;
    for (double v : a.values) s += v * v;
    return std::sqrt(s);
}

inline double sq_distance(const ParamVector& a, const ParamVector& b) {
    require_same_shape(a, b, "sq_distance");
    double s = 0.0;
    for (std::size_t i = 0; i < a.values.size(); ++i) {
        const double d = a.values[i] - b.values[i];
        s += d * d;
    }
    return s;
}

// Cosine similarity; 0 when either vector has zero norm.
inline double cosine_similarity(const ParamVector& a, const ParamVector& b) {
    const double na = norm(a);
    const double nb = norm(b);
    if (na == 0.0 || nb == 0.0) return 0.0;
    return dot(a, b) / (na * nb);
}

inline bool all_finite(const ParamVector& a) {
    for (double v : a.values)
        if (!std::isfinite(v)) return false;
    return true;
}

}  // namespace fedsim
