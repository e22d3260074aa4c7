#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>

#include "microfarm/error.hpp"
#include "microfarm/ratings.hpp"

namespace microfarm::ratings {

namespace fs = std::filesystem;

namespace {

std::vector<std::string> split_fields(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur.push_back(c);
        }
    }
    out.push_back(cur);
    return out;
}

std::ofstream open_out(const fs::path& path) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorKind::io, "cannot write " + path.string());
    return out;
}

std::string header(std::size_t n) {
    std::string h;
    for (std::size_t j = 0; j < n; ++j) {
        if (j) h += ',';
        h += "plant_" + std::to_string(j);
    }
    return h;
}

template <typename Cell>
void write_matrix(const fs::path& path, std::size_t m, std::size_t n, Cell cell) {
    auto out = open_out(path);
    out << header(n) << '\n';
    std::string line;
    for (std::size_t i = 0; i < m; ++i) {
        line.clear();
        for (std::size_t j = 0; j < n; ++j) {
            if (j) line += ',';
            int v = cell(i, j);
            if (v) line += static_cast<char>('0' + v);
        }
        out << line << '\n';
    }
    if (!out) throw Error(ErrorKind::io, "write failed: " + path.string());
}

std::string fmt2(double v) {
    char buf[48];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

double parse_number(const std::string& s, const std::string& where) {
    try {
        std::size_t used = 0;
        double v = std::stod(s, &used);
        if (used != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw Error(ErrorKind::parse, where + ": not a number '" + s + "'");
    }
}

}  // namespace

void write_ratings_csv(const fs::path& path, const SparseRatingMatrix& s) {
    write_matrix(path, s.rows(), s.cols(), [&](std::size_t i, std::size_t j) { return int(s.raw(i, j)); });
}

void write_ratings_csv(const fs::path& path, const FullRatingMatrix& f) {
    write_matrix(path, f.rows(), f.cols(), [&](std::size_t i, std::size_t j) { return f.at(i, j); });
}

SparseRatingMatrix read_ratings_csv(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorKind::io, "cannot read " + path.string());
    std::string line;
    if (!std::getline(in, line)) throw Error(ErrorKind::parse, path.string() + ": empty file");
    auto head = split_fields(line);
    for (std::size_t j = 0; j < head.size(); ++j)
        if (head[j] != "plant_" + std::to_string(j))
            throw Error(ErrorKind::parse, path.string() + ": header column " + std::to_string(j) +
                                              " must be plant_" + std::to_string(j));
    const std::size_t n = head.size();
    std::vector<std::vector<std::uint8_t>> rows;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line == "\r") continue;
        auto fields = split_fields(line);
        std::string where = path.string() + ":" + std::to_string(lineno);
        if (fields.size() != n)
            throw Error(ErrorKind::parse, where + ": expected " + std::to_string(n) + " fields, got " +
                                              std::to_string(fields.size()));
        std::vector<std::uint8_t> row(n, 0);
        for (std::size_t j = 0; j < n; ++j) {
            const auto& f = fields[j];
            if (f.empty()) continue;
            if (f.size() != 1 || f[0] < '1' || f[0] > '5')
                throw Error(ErrorKind::parse, where + ": rating must be 1..5 or empty, got '" + f + "'");
            row[j] = static_cast<std::uint8_t>(f[0] - '0');
        }
        rows.push_back(std::move(row));
    }
    SparseRatingMatrix s(rows.size(), n);
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t j = 0; j < n; ++j)
            if (rows[i][j]) s.set(i, j, rows[i][j]);
    return s;
}

void write_soils_csv(const fs::path& path, std::span<const SoilProfile> soils) {
    auto out = open_out(path);
    out << "n_ppm,p_ppm,k_ppm,temp_c,ph\n";
    for (const auto& s : soils)
        out << fmt2(s.nitrogen_ppm) << ',' << fmt2(s.phosphorus_ppm) << ',' << fmt2(s.potassium_ppm)
            << ',' << fmt2(s.temperature_c) << ',' << fmt2(s.ph) << '\n';
    if (!out) throw Error(ErrorKind::io, "write failed: " + path.string());
}

std::vector<SoilProfile> read_soils_csv(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorKind::io, "cannot read " + path.string());
    std::string line;
    if (!std::getline(in, line) || split_fields(line) != std::vector<std::string>{"n_ppm", "p_ppm", "k_ppm", "temp_c", "ph"})
        throw Error(ErrorKind::parse, path.string() + ": header must be n_ppm,p_ppm,k_ppm,temp_c,ph");
    std::vector<SoilProfile> soils;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line == "\r") continue;
        auto f = split_fields(line);
        std::string where = path.string() + ":" + std::to_string(lineno);
        if (f.size() != 5) throw Error(ErrorKind::parse, where + ": expected 5 fields");
        SoilProfile s{parse_number(f[0], where), parse_number(f[1], where), parse_number(f[2], where),
                      parse_number(f[3], where), parse_number(f[4], where)};
        s.validate();
        soils.push_back(s);
    }
    return soils;
}

}  // namespace microfarm::ratings
