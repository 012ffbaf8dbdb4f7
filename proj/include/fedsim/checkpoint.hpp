#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>

#include "fedsim/error.hpp"
#include "fedsim/param_vector.hpp"

namespace fedsim {

// Checkpoint layout: one text header line of the form
//   fedsim-params <name>:<d1>x<d2>... <name>:<d1> ...
// followed by the flat values as little-endian 8-byte IEEE doubles.

inline std::string checkpoint_header(const ShapeMap& shape) {
    std::ostringstream os;
    os << "fedsim-params";
    for (const auto& l : shape) {
        os << ' ' << l.name << ':';
        for (std::size_t i = 0; i < l.dims.size(); ++i) {
            if (i) os << 'x';
            os << l.dims[i];
        }
    }
    os << '\n';
    return os.str();
}

inline void write_le_double(std::ostream& out, double v) {
    const auto bits = std::bit_cast<std::uint64_t>(v);
    char bytes[8];
    for (int i = 0; i < 8; ++i) bytes[i] = static_cast<char>((bits >> (8 * i)) & 0xff);
    out.write(bytes, 8);
}

inline double read_le_double(std::istream& in) {
    char bytes[8];
    in.read(bytes, 8);
    if (in.gcount() != 8)
        throw Error(ErrorCategory::Data, "checkpoint truncated: expected 8 more bytes");
    std::uint64_t bits = 0;
    for (int i = 0; i < 8; ++i)
        bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes[i])) << (8 * i);
    return std::bit_cast<double>(bits);
}

inline void save_params(const ParamVector& p, std::ostream& out) {
    out << checkpoint_header(p.shape);
    for (double v : p.values) write_le_double(out, v);
}

inline void save_params(const ParamVector& p, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorCategory::Io, "cannot open '" + path + "' for writing");
    save_params(p, out);
    if (!out) throw Error(ErrorCategory::Io, "write failed for '" + path + "'");
}

inline ShapeMap parse_checkpoint_header(const std::string& line) {
    std::istringstream is(line);
    std::string tag;
    is >> tag;
    if (tag != "fedsim-params")
        throw Error(ErrorCategory::Data, "bad checkpoint header tag '" + tag + "'");
    ShapeMap shape;
    std::string entry;
    while (is >> entry) {
        const auto colon = entry.rfind(':');
        if (colon == std::string::npos || colon == 0 || colon + 1 == entry.size())
            throw Error(ErrorCategory::Data, "bad shape entry '" + entry + "'");
        LayerShape l;
        l.name = entry.substr(0, colon);
        std::size_t pos = colon + 1;
        while (pos < entry.size()) {
            auto x = entry.find('x', pos);
            if (x == std::string::npos) x = entry.size();
            const std::string num = entry.substr(pos, x - pos);
            if (num.empty() || num.find_first_not_of("0123456789") != std::string::npos)
                throw Error(ErrorCategory::Data, "bad dimension '" + num + "' in '" + entry + "'");
            l.dims.push_back(static_cast<std::size_t>(std::stoull(num)));
            pos = x + 1;
        }
        shape.push_back(std::move(l));
    }
    return shape;
}

inline ParamVector load_params(std::istream& in) {
    std::string line;
    if (!std::getline(in, line))
        throw Error(ErrorCategory::Data, "checkpoint missing header line");
    ParamVector p(parse_checkpoint_header(line));
    for (double& v : p.values) v = read_le_double(in);
    return p;
}

inline ParamVector load_params(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCategory::Io, "cannot open '" + path + "'");
    return load_params(in);
}

}  // namespace fedsim
