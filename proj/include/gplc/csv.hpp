#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "gplc/errors.hpp"
#include "gplc/gp.hpp"
#include "gplc/quadrature.hpp"

namespace gplc::csv {

/// Shortest round-trip representation with 17 significant digits.
inline std::string format(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

/// Header plus rows of already formatted cells.
class Table {
public:
    explicit Table(std::vector<std::string> header) : header_(std::move(header)) {}

    void add_row(std::vector<std::string> cells) {
        if (cells.size() != header_.size()) {
            throw DimensionError("csv: row has " + std::to_string(cells.size()) + " cells for " +
                                 std::to_string(header_.size()) + " columns");
        }
        rows_.push_back(std::move(cells));
    }

    void add_row(const std::vector<double>& values) {
        std::vector<std::string> cells;
        cells.reserve(values.size());
        for (double v : values) {
            cells.push_back(format(v));
        }
        add_row(std::move(cells));
    }

    [[nodiscard]] std::string str() const {
        std::string out;
        auto line = [&](const std::vector<std::string>& cells) {
            for (std::size_t k = 0; k < cells.size(); ++k) {
                if (k > 0) {
                    out += ',';
                }
                out += cells[k];
            }
            out += '\n';
        };
        line(header_);
        for (const auto& r : rows_) {
            line(r);
        }
        return out;
    }

    void write(const std::string& path) const {
        std::ofstream f(path, std::ios::binary);
        if (!f) {
            throw Error("csv: cannot open '" + path + "' for writing");
        }
        f << str();
        if (!f) {
            throw Error("csv: failed writing '" + path + "'");
        }
    }

private:
    std::vector<std::string> header_;
    std::vector<std::vector<std::string>> rows_;
};

struct Parsed {
    std::vector<std::string> header;
    std::vector<std::vector<double>> rows;
};

inline std::vector<std::string> split(const std::string& line) {
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream ss(line);
    while (std::getline(ss, cell, ',')) {
        const auto b = cell.find_first_not_of(" \t\r");
        const auto e = cell.find_last_not_of(" \t\r");
        cells.push_back(b == std::string::npos ? std::string() : cell.substr(b, e - b + 1));
    }
    if (!line.empty() && line.back() == ',') {
        cells.emplace_back();
    }
    return cells;
}

/// Numeric CSV with a mandatory header row. Blank lines are skipped.
inline Parsed parse(std::istream& in, const std::string& what = "csv") {
    Parsed p;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) {
            continue;
        }
        auto cells = split(line);
        if (p.header.empty()) {
            p.header = std::move(cells);
            continue;
        }
        if (cells.size() != p.header.size()) {
            throw InvalidInput(what + ": line " + std::to_string(lineno) + " has " + std::to_string(cells.size()) +
                               " cells, header has " + std::to_string(p.header.size()));
        }
        std::vector<double> row;
        row.reserve(cells.size());
        for (const auto& c : cells) {
            std::size_t used = 0;
            double v = 0.0;
            try {
                v = std::stod(c, &used);
            } catch (const std::exception&) {
                used = 0;
            }
            if (used == 0 || used != c.size()) {
                throw InvalidInput(what + ": line " + std::to_string(lineno) + ": '" + c + "' is not a number");
            }
            row.push_back(v);
        }
        p.rows.push_back(std::move(row));
    }
    if (p.header.empty()) {
        throw InvalidInput(what + ": missing header row");
    }
    return p;
}

inline Parsed parse_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) {
        throw InvalidInput("csv: cannot open '" + path + "'");
    }
    return parse(f, path);
}

/// Design points and observations from columns x_1..x_d followed by either
/// z, s, sigma_eps2 (precomputed means) or z_1..z_s (replicates).
struct DesignData {
    Points points;
    ObservationSet observations;
};

inline DesignData load_design(const Parsed& p, const std::string& what = "design csv") {
    std::size_t d = 0;
    while (d < p.header.size() && p.header[d] == "x_" + std::to_string(d + 1)) {
        ++d;
    }
    if (d == 0) {
        throw InvalidInput(what + ": header must start with x_1");
    }
    if (p.rows.empty()) {
        throw InvalidInput(what + ": no data rows");
    }
    const std::vector<std::string> rest(p.header.begin() + static_cast<std::ptrdiff_t>(d), p.header.end());
    const auto n = static_cast<Eigen::Index>(p.rows.size());
    DesignData out;
    out.points.resize(n, static_cast<Eigen::Index>(d));
    for (Eigen::Index i = 0; i < n; ++i) {
        for (std::size_t k = 0; k < d; ++k) {
            out.points(i, static_cast<Eigen::Index>(k)) = p.rows[static_cast<std::size_t>(i)][k];
        }
    }
    if (rest == std::vector<std::string>{"z", "s", "sigma_eps2"}) {
        Eigen::VectorXd z(n);
        Eigen::VectorXd noise(n);
        Eigen::VectorXd sig(n);
        std::vector<int> counts(static_cast<std::size_t>(n));
        for (Eigen::Index i = 0; i < n; ++i) {
            const auto& r = p.rows[static_cast<std::size_t>(i)];
            z[i] = r[d];
            const double s = r[d + 1];
            if (!(s >= 1.0) || s != std::floor(s)) {
                throw InvalidInput(what + ": row " + std::to_string(i + 1) + ": s must be an integer >= 1");
            }
            counts[static_cast<std::size_t>(i)] = static_cast<int>(s);
            sig[i] = r[d + 2];
            noise[i] = sig[i] / s;
        }
        out.observations = ObservationSet::from_means(z, noise, counts);
        out.observations.sigma_eps2 = sig;
        return out;
    }
    for (std::size_t j = 0; j < rest.size(); ++j) {
        if (rest[j] != "z_" + std::to_string(j + 1)) {
            throw InvalidInput(what + ": after x_1..x_" + std::to_string(d) +
                               " expected either 'z,s,sigma_eps2' or 'z_1..z_s', found '" + rest[j] + "'");
        }
    }
    if (rest.empty()) {
        throw InvalidInput(what + ": no observation columns");
    }
    std::vector<std::vector<double>> reps(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto& r = p.rows[static_cast<std::size_t>(i)];
        reps[static_cast<std::size_t>(i)].assign(r.begin() + static_cast<std::ptrdiff_t>(d), r.end());
    }
    if (rest.size() >= 2) {
        out.observations = ObservationSet::from_replicates(std::move(reps));
    } else {
        // A single replicate carries no variance information; noise is set to 0.
        out.observations = ObservationSet::from_replicates(std::move(reps), Eigen::VectorXd::Zero(n));
    }
    return out;
}

} // namespace gplc::csv
