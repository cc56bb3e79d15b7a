#pragma once

// FieldSample: one simulated realization on a space-time grid, with CSV and
// JSON serialization.  The JSON envelope round-trips bit-exactly; the CSV
// carries the same metadata in its first two rows and then one row per time
// point.

#include <Eigen/Dense>
#include <cstdint>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "powvar/io.hpp"
#include "powvar/params.hpp"

namespace powvar {

enum class FieldKind { u_values, ux_increments, delta_u_increments };

inline const char* to_string(FieldKind k) {
    switch (k) {
        case FieldKind::u_values: return "u_values";
        case FieldKind::ux_increments: return "ux_increments";
        case FieldKind::delta_u_increments: return "delta_u_increments";
    }
    return "unknown";
}

inline FieldKind field_kind_from_string(const std::string& s) {
    if (s == "u_values") return FieldKind::u_values;
    if (s == "ux_increments") return FieldKind::ux_increments;
    if (s == "delta_u_increments") return FieldKind::delta_u_increments;
    throw domain_error("unknown field kind: " + s);
}

// Columns per kind: u on the N+1 grid nodes; u_x increments for i = 1..N;
// difference-quotient increments on the interior range i = 2..N-1.
inline int field_columns(FieldKind kind, int n_space) {
    switch (kind) {
        case FieldKind::u_values: return n_space + 1;
        case FieldKind::ux_increments: return n_space;
        case FieldKind::delta_u_increments: return n_space - 2;
    }
    return 0;
}

struct FieldSample {
    SamplingScheme scheme;
    FieldKind kind = FieldKind::u_values;
    ModelParams params;
    Eigen::MatrixXd values;  // n_time x field_columns(kind, n_space)
    std::uint64_t seed = 0;
    int n_modes = 0;  // spectral truncation; 0 when not applicable

    void validate() const {
        scheme.validate();
        if (values.rows() != scheme.n_time() ||
            values.cols() != field_columns(kind, scheme.n_space))
            throw domain_error("FieldSample: array dimensions do not match scheme/kind");
        if (!values.allFinite()) throw domain_error("FieldSample: non-finite entries");
    }
};

inline nlohmann::json to_json(const FieldSample& f) {
    nlohmann::json j;
    j["kind"] = to_string(f.kind);
    j["theta"] = f.params.theta;
    j["sigma"] = f.params.sigma;
    j["seed"] = f.seed;
    j["n_modes"] = f.n_modes;
    j["scheme"] = {{"a_end", f.scheme.a_end},     {"b_end", f.scheme.b_end},
                   {"n_space", f.scheme.n_space}, {"times", f.scheme.times},
                   {"gamma", f.scheme.gamma},     {"stencil_a", f.scheme.stencil_a},
                   {"stencil_b", f.scheme.stencil_b}};
    nlohmann::json rows = nlohmann::json::array();
    for (Eigen::Index r = 0; r < f.values.rows(); ++r) {
        nlohmann::json row = nlohmann::json::array();
        for (Eigen::Index c = 0; c < f.values.cols(); ++c) row.push_back(f.values(r, c));
        rows.push_back(std::move(row));
    }
    j["values"] = std::move(rows);
    return j;
}

inline FieldSample field_from_json(const nlohmann::json& j) {
    FieldSample f;
    f.kind = field_kind_from_string(j.at("kind").get<std::string>());
    f.params = ModelParams(j.at("theta").get<double>(), j.at("sigma").get<double>());
    f.seed = j.at("seed").get<std::uint64_t>();
    f.n_modes = j.at("n_modes").get<int>();
    const auto& s = j.at("scheme");
    f.scheme.a_end = s.at("a_end").get<double>();
    f.scheme.b_end = s.at("b_end").get<double>();
    f.scheme.n_space = s.at("n_space").get<int>();
    f.scheme.times = s.at("times").get<std::vector<double>>();
    f.scheme.gamma = s.at("gamma").get<double>();
    f.scheme.stencil_a = s.at("stencil_a").get<double>();
    f.scheme.stencil_b = s.at("stencil_b").get<double>();
    const auto& rows = j.at("values");
    const int m = static_cast<int>(rows.size());
    const int cols = m > 0 ? static_cast<int>(rows[0].size()) : 0;
    f.values.resize(m, cols);
    for (int r = 0; r < m; ++r)
        for (int c = 0; c < cols; ++c) f.values(r, c) = rows[r][c].get<double>();
    f.validate();
    return f;
}

inline std::string to_csv(const FieldSample& f) {
    std::ostringstream out;
    out << "kind,theta,sigma,seed,a_end,b_end,n_space,n_time,gamma,stencil_a,stencil_b,"
           "n_modes\n";
    out << to_string(f.kind) << ',' << fmt17(f.params.theta) << ',' << fmt17(f.params.sigma)
        << ',' << f.seed << ',' << fmt17(f.scheme.a_end) << ',' << fmt17(f.scheme.b_end) << ','
        << f.scheme.n_space << ',' << f.scheme.n_time() << ',' << fmt17(f.scheme.gamma) << ','
        << fmt17(f.scheme.stencil_a) << ',' << fmt17(f.scheme.stencil_b) << ',' << f.n_modes
        << '\n';
    for (Eigen::Index r = 0; r < f.values.rows(); ++r) {
        out << fmt17(f.scheme.times[static_cast<std::size_t>(r)]);
        for (Eigen::Index c = 0; c < f.values.cols(); ++c) out << ',' << fmt17(f.values(r, c));
        out << '\n';
    }
    return out.str();
}

inline FieldSample field_from_csv(const std::string& text) {
    std::istringstream in(text);
    std::string header, meta;
    if (!std::getline(in, header) || !std::getline(in, meta))
        throw domain_error("field_from_csv: truncated input");
    std::vector<std::string> cells;
    {
        std::istringstream ms(meta);
        std::string cell;
        while (std::getline(ms, cell, ',')) cells.push_back(cell);
    }
    if (cells.size() != 12) throw domain_error("field_from_csv: malformed metadata row");
    FieldSample f;
    f.kind = field_kind_from_string(cells[0]);
    f.params = ModelParams(std::stod(cells[1]), std::stod(cells[2]));
    f.seed = std::stoull(cells[3]);
    f.scheme.a_end = std::stod(cells[4]);
    f.scheme.b_end = std::stod(cells[5]);
    f.scheme.n_space = std::stoi(cells[6]);
    const int m = std::stoi(cells[7]);
    f.scheme.gamma = std::stod(cells[8]);
    f.scheme.stencil_a = std::stod(cells[9]);
    f.scheme.stencil_b = std::stod(cells[10]);
    f.n_modes = std::stoi(cells[11]);
    const int cols = field_columns(f.kind, f.scheme.n_space);
    f.values.resize(m, cols);
    f.scheme.times.resize(m);
    std::string line;
    for (int r = 0; r < m; ++r) {
        if (!std::getline(in, line)) throw domain_error("field_from_csv: missing data row");
        std::istringstream ls(line);
        std::string cell;
        if (!std::getline(ls, cell, ',')) throw domain_error("field_from_csv: bad data row");
        f.scheme.times[r] = std::stod(cell);
        for (int c = 0; c < cols; ++c) {
            if (!std::getline(ls, cell, ','))
                throw domain_error("field_from_csv: short data row");
            f.values(r, c) = std::stod(cell);
        }
    }
    f.validate();
    return f;
}

}  // namespace powvar
