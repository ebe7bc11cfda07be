#include "thomlab/io.hpp"

#include "thomlab/error.hpp"

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace thomlab {

namespace {

std::ofstream open_out(const std::string& path) {
    const auto parent = std::filesystem::path(path).parent_path();
    if (!parent.empty()) std::filesystem::create_directories(parent);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorKind::IoError, "cannot write " + path);
    return out;
}

std::vector<std::string> split(const std::string& line, char sep) {
    std::vector<std::string> out;
    std::string cell;
    std::istringstream ss(line);
    while (std::getline(ss, cell, sep)) out.push_back(cell);
    if (!line.empty() && line.back() == sep) out.emplace_back();
    return out;
}

double parse_double(const std::string& s, const std::string& where) {
    double v = 0.0;
    const char* b = s.data();
    const char* e = s.data() + s.size();
    while (b < e && *b == ' ') ++b;
    const auto r = std::from_chars(b, e, v);
    if (r.ec != std::errc() || r.ptr != e) {
        if (s == "nan") return std::nan("");
        throw Error(ErrorKind::ConfigError, where + ": cannot parse number '" + s + "'");
    }
    return v;
}

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<double>> rows;
};

CsvTable read_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::IoError, "cannot open " + path);
    CsvTable t;
    std::string line;
    long lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        auto cells = split(line, ',');
        if (t.header.empty()) {
            t.header = std::move(cells);
            continue;
        }
        if (cells.size() != t.header.size()) {
            throw Error(ErrorKind::ConfigError, path + ":" + std::to_string(lineno) + ": expected " +
                                                    std::to_string(t.header.size()) + " columns");
        }
        std::vector<double> row;
        for (const auto& c : cells) row.push_back(c.empty() ? std::nan("") : parse_double(c, path + ":" + std::to_string(lineno)));
        t.rows.push_back(std::move(row));
    }
    if (t.header.empty()) throw Error(ErrorKind::ConfigError, path + ": missing CSV header");
    return t;
}

} // namespace

std::string format_double(double x) {
    if (std::isnan(x)) return "nan";
    if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
    char buf[32];
    const auto r = std::to_chars(buf, buf + sizeof buf, x);
    return std::string(buf, r.ptr);
}

std::string fnv1a_hex(std::string_view data) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : data) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

std::string Provenance::comment_line() const {
    return "# thomlab " + std::string(kToolVersion) + " config=" + config_hash + " seed=" + std::to_string(seed);
}

nlohmann::json Provenance::to_json() const {
    return {{"tool", "thomlab"}, {"version", kToolVersion}, {"config_hash", config_hash}, {"seed", seed}};
}

void write_trajectory_csv(const std::string& path, const Trajectory& traj, const Potential* g, const Provenance& prov) {
    traj.validate();
    auto out = open_out(path);
    const int n = traj.dimension();
    out << prov.comment_line() << '\n' << 't';
    for (int i = 1; i <= n; ++i) out << ",y_" << i;
    if (traj.has_velocity()) {
        for (int i = 1; i <= n; ++i) out << ",v_" << i;
    }
    out << ",norm_y,g_y\n";
    for (std::size_t k = 0; k < traj.size(); ++k) {
        out << format_double(traj.t[k]);
        for (int i = 0; i < n; ++i) out << ',' << format_double(traj.y[k][i]);
        if (traj.has_velocity()) {
            for (int i = 0; i < n; ++i) out << ',' << format_double(traj.v[k][i]);
        }
        out << ',' << format_double(traj.y[k].norm()) << ',';
        if (g) out << format_double(g->eval(traj.y[k]));
        out << '\n';
    }
}

Trajectory read_trajectory_csv(const std::string& path) {
    const auto tab = read_csv(path);
    const auto& h = tab.header;
    if (h.empty() || h[0] != "t") throw Error(ErrorKind::ConfigError, path + ": first column must be t");
    int ny = 0, nv = 0;
    for (const auto& c : h) {
        if (c.rfind("y_", 0) == 0) ++ny;
        if (c.rfind("v_", 0) == 0) ++nv;
    }
    if (ny == 0 || (nv != 0 && nv != ny)) throw Error(ErrorKind::ConfigError, path + ": bad y_/v_ columns");
    Trajectory tr;
    for (const auto& row : tab.rows) {
        tr.t.push_back(row[0]);
        tr.y.push_back(Eigen::Map<const Vec>(row.data() + 1, ny));
        if (nv) tr.v.push_back(Eigen::Map<const Vec>(row.data() + 1 + ny, nv));
    }
    tr.meta["source"] = path;
    tr.validate();
    return tr;
}

void write_pde_series_csv(const std::string& path, const PdeRun& run, const Provenance& prov) {
    auto out = open_out(path);
    out << prov.comment_line() << "\nt,norm_L2,x1,x2,F_u,Xplus,Xzero,Xminus\n";
    for (std::size_t i = 0; i < run.t.size(); ++i) {
        out << format_double(run.t[i]) << ',' << format_double(run.norm[i]) << ',' << format_double(run.x[i][0]) << ','
            << format_double(run.x[i][1]) << ',' << format_double(run.energy[i]) << ',' << format_double(run.Xplus[i])
            << ',' << format_double(run.Xzero[i]) << ',' << format_double(run.Xminus[i]) << '\n';
    }
}

PdeSeries read_pde_series_csv(const std::string& path) {
    const auto tab = read_csv(path);
    const std::vector<std::string> want{"t", "norm_L2", "x1", "x2", "F_u", "Xplus", "Xzero", "Xminus"};
    if (tab.header != want) throw Error(ErrorKind::ConfigError, path + ": expected header t,norm_L2,x1,x2,F_u,Xplus,Xzero,Xminus");
    PdeSeries s;
    for (const auto& r : tab.rows) {
        s.t.push_back(r[0]);
        s.norm.push_back(r[1]);
        s.x1.push_back(r[2]);
        s.x2.push_back(r[3]);
        s.F.push_back(r[4]);
        s.Xplus.push_back(r[5]);
        s.Xzero.push_back(r[6]);
        s.Xminus.push_back(r[7]);
    }
    return s;
}

void write_snapshot_csv(const std::string& path, const SpectralState& s, const Provenance& prov) {
    auto out = open_out(path);
    out << prov.comment_line() << "\n# t=" << format_double(s.time) << "\nk,Re,Im\n";
    for (int k = 0; k <= s.K(); ++k) {
        out << k << ',' << format_double(s.c[k].real()) << ',' << format_double(s.c[k].imag()) << '\n';
    }
}

void write_text(const std::string& path, const std::string& content) {
    auto out = open_out(path);
    out << content;
}

void write_json(const std::string& path, nlohmann::json j, const Provenance& prov) {
    if (!j.is_object()) j = nlohmann::json{{"data", std::move(j)}};
    j["provenance"] = prov.to_json();
    write_text(path, j.dump(2) + "\n");
}

} // namespace thomlab
