#include "coco/csv.hpp"

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace coco {

namespace {

double parse_cell(const std::string& cell, const std::string& path) {
    const char* b = cell.data();
    const char* e = b + cell.size();
    while (b < e && (*b == ' ' || *b == '\t')) ++b;
    while (e > b && (e[-1] == ' ' || e[-1] == '\t' || e[-1] == '\r')) --e;
    double value = 0.0;
    auto [ptr, ec] = std::from_chars(b, e, value);
    if (ec != std::errc() || ptr != e || !std::isfinite(value))
        throw std::runtime_error(path + ": non-numeric cell '" + cell + "'");
    return value;
}

std::string format_double(double v) {
    char buf[32];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    (void)ec;
    return std::string(buf, ptr);
}

} // namespace

std::string csv_quote(const std::string& field) {
    if (field.find_first_of(",\"\r\n") == std::string::npos) return field;
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') out += '"';
        out += c;
    }
    out += '"';
    return out;
}

std::vector<std::string> csv_split_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    cur += '"';
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                cur += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            fields.push_back(cur);
            cur.clear();
        } else if (c == '\r') {
            // tolerated; stripped
        } else {
            cur += c;
        }
    }
    fields.push_back(cur);
    return fields;
}

MultiEnvData load_csv(const std::vector<std::string>& paths,
                      std::vector<Eigen::Index> nondescendants) {
    if (paths.empty()) throw std::invalid_argument("load_csv: no files given");
    MultiEnvData multi;
    std::vector<std::string> header;
    for (const auto& path : paths) {
        std::ifstream in(path);
        if (!in) throw std::runtime_error("load_csv: cannot open " + path);
        std::string line;
        if (!std::getline(in, line) || line.empty())
            throw std::runtime_error("load_csv: empty file " + path);
        auto cols = csv_split_line(line);
        if (cols.empty() || cols.front() != "y")
            throw std::runtime_error("load_csv: first column must be 'y' in " + path);
        if (header.empty()) {
            header = cols;
        } else if (cols != header) {
            throw std::runtime_error("load_csv: header mismatch in " + path);
        }
        std::vector<std::vector<double>> rows;
        while (std::getline(in, line)) {
            if (line.empty() || line == "\r") continue;
            auto cells = csv_split_line(line);
            if (cells.size() != header.size())
                throw std::runtime_error("load_csv: ragged row in " + path);
            std::vector<double> row;
            row.reserve(cells.size());
            for (const auto& cell : cells) row.push_back(parse_cell(cell, path));
            rows.push_back(std::move(row));
        }
        if (rows.empty()) throw std::runtime_error("load_csv: no data rows in " + path);
        EnvironmentDataset env;
        env.env_id = std::filesystem::path(path).stem().string();
        auto n = static_cast<Eigen::Index>(rows.size());
        auto p = static_cast<Eigen::Index>(header.size()) - 1;
        env.X.resize(n, p);
        env.y.resize(n);
        for (Eigen::Index i = 0; i < n; ++i) {
            env.y(i) = rows[static_cast<std::size_t>(i)][0];
            for (Eigen::Index j = 0; j < p; ++j)
                env.X(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j) + 1];
        }
        env.covariate_names.assign(header.begin() + 1, header.end());
        env.validate();
        multi.environments.push_back(std::move(env));
    }
    multi.known_nondescendants = std::move(nondescendants);
    multi.validate();
    return multi;
}

void save_csv(const EnvironmentDataset& env, const std::string& path) {
    env.validate();
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("save_csv: cannot open " + path);
    out << "y";
    for (const auto& name : env.covariate_names) out << ',' << csv_quote(name);
    out << "\r\n";
    for (Eigen::Index i = 0; i < env.n(); ++i) {
        out << format_double(env.y(i));
        for (Eigen::Index j = 0; j < env.p(); ++j) out << ',' << format_double(env.X(i, j));
        out << "\r\n";
    }
    if (!out) throw std::runtime_error("save_csv: write failed for " + path);
}

} // namespace coco
