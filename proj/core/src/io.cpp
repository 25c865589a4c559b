#include "gqme/io.hpp"

#include <cstdio>
#include <fstream>
#include <random>
#include <sstream>

#include <json.hpp>

#include "gqme/errors.hpp"

namespace gqme {

namespace fs = std::filesystem;
using nlohmann::json;

const char* version() { return GQME_VERSION; }

std::string format_double(double x)
{
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

fs::path sidecar_path(const fs::path& csv)
{
    fs::path p = csv;
    p.replace_extension(".json");
    return p;
}

void atomic_write(const fs::path& path, const std::string& content)
{
    std::random_device rd;
    fs::path tmp = path;
    tmp += ".tmp" + std::to_string(rd());
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw ValidationError("cannot open " + tmp.string() + " for writing");
        out << content;
        out.flush();
        if (!out) throw ValidationError("write failed: " + tmp.string());
    }
    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec) {
        fs::remove(tmp, ec);
        throw ValidationError("cannot move output into place: " + path.string());
    }
}

namespace {

std::string read_file(const fs::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::vector<std::string> split(const std::string& line, char sep)
{
    std::vector<std::string> out;
    std::string cell;
    std::istringstream ss(line);
    while (std::getline(ss, cell, sep)) out.push_back(cell);
    if (!line.empty() && line.back() == sep) out.emplace_back();
    return out;
}

double parse_double(const std::string& s, const fs::path& path)
{
    std::size_t pos = 0;
    double v = 0.0;
    try {
        v = std::stod(s, &pos);
    } catch (const std::exception&) {
        throw ValidationError(path.string() + ": not a number: '" + s + "'");
    }
    while (pos < s.size() && (s[pos] == ' ' || s[pos] == '\r')) ++pos;
    if (pos != s.size()) throw ValidationError(path.string() + ": not a number: '" + s + "'");
    return v;
}

// Rows of a CSV with a required header.
std::vector<std::vector<double>> read_table(const fs::path& path, const std::vector<std::string>& header)
{
    std::istringstream in(read_file(path));
    std::string line;
    if (!std::getline(in, line)) throw ValidationError(path.string() + ": empty file");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (split(line, ',') != header) throw ValidationError(path.string() + ": unexpected header");
    std::vector<std::vector<double>> rows;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto cells = split(line, ',');
        if (cells.size() != header.size())
            throw ValidationError(path.string() + ": row " + std::to_string(rows.size() + 1) + " has " +
                                  std::to_string(cells.size()) + " columns, expected " +
                                  std::to_string(header.size()));
        std::vector<double> row;
        row.reserve(cells.size());
        for (const auto& c : cells) row.push_back(parse_double(c, path));
        rows.push_back(std::move(row));
    }
    return rows;
}

std::vector<std::string> matrix_header(int n)
{
    std::vector<std::string> h{"t_index", "t"};
    for (int r = 0; r < n; ++r)
        for (int c = 0; c < n; ++c) {
            h.push_back("re_" + std::to_string(r) + std::to_string(c));
            h.push_back("im_" + std::to_string(r) + std::to_string(c));
        }
    return h;
}

std::string join(const std::vector<std::string>& cells)
{
    std::string out;
    for (std::size_t i = 0; i < cells.size(); ++i) {
        if (i) out += ',';
        out += cells[i];
    }
    return out;
}

template <class M>
std::string matrix_table(const std::vector<M>& mats, const auto& time_of)
{
    constexpr int n = M::RowsAtCompileTime;
    std::string out = join(matrix_header(n)) + "\n";
    for (std::size_t i = 0; i < mats.size(); ++i) {
        out += std::to_string(i) + "," + format_double(time_of(i));
        for (int r = 0; r < n; ++r)
            for (int c = 0; c < n; ++c)
                out += "," + format_double(mats[i](r, c).real()) + "," + format_double(mats[i](r, c).imag());
        out += "\n";
    }
    return out;
}

template <class M>
std::vector<M> parse_matrices(const std::vector<std::vector<double>>& rows, const fs::path& path)
{
    constexpr int n = M::RowsAtCompileTime;
    std::vector<M> out;
    out.reserve(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i][0] != static_cast<double>(i)) throw ValidationError(path.string() + ": t_index out of sequence");
        M m;
        for (int r = 0; r < n; ++r)
            for (int c = 0; c < n; ++c) {
                const auto k = static_cast<std::size_t>(2 + 2 * (n * r + c));
                m(r, c) = cplx(rows[i][k], rows[i][k + 1]);
            }
        out.push_back(m);
    }
    return out;
}

void check_grid(const std::vector<std::vector<double>>& rows, double dt, double offset, const fs::path& path)
{
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const double expected = (static_cast<double>(i) + offset) * dt;
        if (std::abs(rows[i][1] - expected) > 1e-9 * std::max(1.0, std::abs(expected)))
            throw ValidationError(path.string() + ": t column does not match a uniform grid with dt = " +
                                  format_double(dt));
    }
}

} // namespace

void write_metadata(const fs::path& csv, const FileMetadata& meta)
{
    json j;
    j["kind"] = meta.kind;
    j["scheme"] = meta.scheme;
    j["dt"] = meta.dt;
    j["system"] = {{"epsilon", meta.system.epsilon}, {"omega", meta.system.omega}};
    j["provenance"] = meta.provenance;
    j["tool_version"] = meta.tool_version;
    if (meta.seed) j["seed"] = *meta.seed;
    else j["seed"] = nullptr;
    j["notes"] = meta.notes;
    atomic_write(sidecar_path(csv), j.dump(2) + "\n");
}

bool has_metadata(const fs::path& csv) { return fs::exists(sidecar_path(csv)); }

FileMetadata read_metadata(const fs::path& csv)
{
    const fs::path p = sidecar_path(csv);
    FileMetadata meta;
    try {
        const json j = json::parse(read_file(p));
        meta.kind = j.at("kind").get<std::string>();
        meta.scheme = j.value("scheme", "");
        meta.dt = j.at("dt").get<double>();
        if (j.contains("system")) {
            meta.system.epsilon = j["system"].value("epsilon", 0.0);
            meta.system.omega = j["system"].value("omega", 0.0);
        }
        meta.provenance = j.value("provenance", "");
        meta.tool_version = j.value("tool_version", "");
        if (j.contains("seed") && !j["seed"].is_null()) meta.seed = j["seed"].get<std::uint64_t>();
        if (j.contains("notes")) meta.notes = j["notes"].get<std::map<std::string, std::string>>();
    } catch (const json::exception& e) {
        throw ValidationError(p.string() + ": " + e.what());
    }
    return meta;
}

void write_trajectory(const fs::path& path, const MapTrajectory& traj, FileMetadata meta)
{
    meta.kind = "TRAJECTORY";
    meta.dt = traj.dt;
    atomic_write(path, matrix_table(traj.maps, [&](std::size_t i) { return traj.time(i); }));
    write_metadata(path, meta);
}

MapTrajectory read_trajectory(const fs::path& path, FileMetadata* meta)
{
    const auto rows = read_table(path, matrix_header(4));
    MapTrajectory traj;
    if (has_metadata(path)) {
        FileMetadata m = read_metadata(path);
        if (m.kind != "TRAJECTORY") throw ValidationError(path.string() + ": not a trajectory file (kind " + m.kind + ")");
        traj.dt = m.dt;
        if (meta) *meta = m;
    } else {
        if (rows.size() < 2) throw ValidationError(path.string() + ": cannot infer dt without a sidecar");
        traj.dt = rows[1][1] - rows[0][1];
        if (meta) *meta = FileMetadata{"TRAJECTORY", "", traj.dt, {}, "", "", {}, {}};
    }
    check_grid(rows, traj.dt, 0.0, path);
    traj.maps = parse_matrices<Superoperator>(rows, path);
    return traj;
}

void write_kernels(const fs::path& path, const KernelSeries& ks, FileMetadata meta)
{
    meta.kind = to_string(ks.kind);
    meta.dt = ks.dt;
    atomic_write(path, matrix_table(ks.kernels, [&](std::size_t i) { return ks.time(i); }));
    write_metadata(path, meta);
}

KernelSeries read_kernels(const fs::path& path, FileMetadata* meta)
{
    if (!has_metadata(path)) throw ValidationError(path.string() + ": kernel file needs its JSON sidecar");
    const FileMetadata m = read_metadata(path);
    KernelSeries ks;
    ks.kind = kernel_kind_from_string(m.kind);
    ks.dt = m.dt;
    const auto rows = read_table(path, matrix_header(4));
    check_grid(rows, ks.dt, ks.kind == KernelKind::ContinuousHalf ? 0.5 : 0.0, path);
    ks.kernels = parse_matrices<Superoperator>(rows, path);
    if (meta) *meta = m;
    return ks;
}

void write_states(const fs::path& path, const StateSeries& states, FileMetadata meta)
{
    meta.kind = "STATES";
    atomic_write(path, matrix_table(states, [&](std::size_t i) { return static_cast<double>(i) * meta.dt; }));
    write_metadata(path, meta);
}

StateSeries read_states(const fs::path& path, FileMetadata* meta)
{
    const auto rows = read_table(path, matrix_header(2));
    if (has_metadata(path)) {
        const FileMetadata m = read_metadata(path);
        check_grid(rows, m.dt, 0.0, path);
        if (meta) *meta = m;
    }
    return parse_matrices<Operator>(rows, path);
}

void write_bath_coefficients(const fs::path& path, const ExpFit& fit)
{
    std::string out = "re_alpha,im_alpha,re_nu,im_nu\n";
    for (const auto& t : fit.terms)
        out += format_double(t.alpha.real()) + "," + format_double(t.alpha.imag()) + "," +
               format_double(t.nu.real()) + "," + format_double(t.nu.imag()) + "\n";
    atomic_write(path, out);
}

ExpFit read_bath_coefficients(const fs::path& path)
{
    const auto rows = read_table(path, {"re_alpha", "im_alpha", "re_nu", "im_nu"});
    if (rows.empty()) throw ValidationError(path.string() + ": no bath terms");
    ExpFit fit;
    for (const auto& r : rows) {
        if (!(r[2] > 0.0)) throw ValidationError(path.string() + ": decay rates need Re(nu) > 0");
        fit.terms.push_back({cplx(r[0], r[1]), cplx(r[2], r[3])});
    }
    return fit;
}

DensityMatrix parse_rho0(const std::string& spec)
{
    if (spec == "pop0") return DensityMatrix::ground();
    if (spec == "pop1") return DensityMatrix::excited();
    if (spec == "plus") return DensityMatrix::plus();
    std::string s = spec;
    for (char& c : s)
        if (c == ';') c = ' ';
    std::istringstream in(s);
    std::vector<cplx> v;
    std::string tok;
    while (in >> tok) {
        std::istringstream t(tok);
        cplx z;
        if (!(t >> z) || t.rdbuf()->in_avail() != 0)
            throw ValidationError("rho0: cannot parse entry '" + tok + "'");
        v.push_back(z);
    }
    if (v.size() != 4)
        throw ValidationError("rho0 must be pop0, pop1, plus, or four complex entries; got '" + spec + "'");
    Operator m;
    m << v[0], v[1], v[2], v[3];
    return DensityMatrix(m);
}

} // namespace gqme
