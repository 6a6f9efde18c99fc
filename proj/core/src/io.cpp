#include "echosim/io.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace echosim::io {

std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

namespace {

double parse_double(std::string_view s) {
    double v = 0.0;
    const auto* begin = s.data();
    const auto* end = s.data() + s.size();
    while (begin < end && (*begin == ' ' || *begin == '\t')) ++begin;
    const auto res = std::from_chars(begin, end, v);
    if (res.ec != std::errc())
        throw std::runtime_error("bad number in CSV: " + std::string(s));
    return v;
}

std::vector<std::string_view> split(std::string_view line, char sep) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = line.find(sep, start);
        if (pos == std::string_view::npos) {
            out.push_back(line.substr(start));
            break;
        }
        out.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
    return out;
}

std::ofstream open_out(const std::filesystem::path& path) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot write " + path.string());
    return f;
}

}  // namespace

void write_profile_csv(const spectral::SpectralProfile& profile,
                       const std::filesystem::path& path) {
    auto f = open_out(path);
    f << "# background=" << format_double(profile.background) << "\n";
    f << "detuning_hz,optical_depth\n";
    for (std::size_t i = 0; i < profile.grid.size(); ++i)
        f << format_double(profile.grid[i]) << ','
          << format_double(profile.depth[i]) << '\n';
}

spectral::SpectralProfile read_profile_csv(const std::filesystem::path& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot read " + path.string());
    spectral::SpectralProfile p;
    std::string line;
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        if (line[0] == '#') {
            const auto pos = line.find("background=");
            if (pos != std::string::npos)
                p.background = parse_double(
                    std::string_view(line).substr(pos + 11));
            continue;
        }
        if (line.rfind("detuning_hz", 0) == 0) continue;
        const auto cols = split(line, ',');
        if (cols.size() != 2)
            throw std::runtime_error("expected two columns in " + path.string());
        p.grid.push_back(parse_double(cols[0]));
        p.depth.push_back(parse_double(cols[1]));
    }
    return p;
}

void write_populations_csv(const pumping::PopulationField& pops,
                           const std::filesystem::path& path) {
    auto f = open_out(path);
    f << "detuning_hz,g1,g2,e,p\n";
    for (std::size_t i = 0; i < pops.size(); ++i)
        f << format_double(pops.grid[i]) << ',' << format_double(pops.g1[i])
          << ',' << format_double(pops.g2[i]) << ',' << format_double(pops.e[i])
          << ',' << format_double(pops.p[i]) << '\n';
}

void write_echo_csv(const echo::EchoResult& result,
                    const std::filesystem::path& path) {
    auto f = open_out(path);
    f << "time_s,intensity,phase_rad\n";
    for (std::size_t k = 0; k < result.times_s.size(); ++k)
        f << format_double(result.times_s[k]) << ','
          << format_double(result.intensity[k]) << ','
          << format_double(result.phase_rad[k]) << '\n';
}

std::string echo_list_json(const echo::EchoResult& result) {
    nlohmann::json j;
    j["transmitted_fraction"] = result.transmitted_fraction;
    j["absorbed_remainder"] = result.absorbed_remainder;
    j["mean_photons"] = result.mean_photons;
    j["energy_warning"] = result.energy_warning;
    j["echoes"] = nlohmann::json::array();
    for (const auto& e : result.echoes)
        j["echoes"].push_back({{"m", e.order},
                               {"t_peak_s", e.peak_time_s},
                               {"efficiency", e.efficiency},
                               {"fwhm_s", e.fwhm_s},
                               {"phase_rad", e.phase_rad}});
    return j.dump(2);
}

void write_histogram_csv(const detection::CountHistogram& hist,
                         const std::filesystem::path& path) {
    auto f = open_out(path);
    f << "bin_start_s,bin_end_s,counts\n";
    for (std::size_t b = 0; b < hist.counts.size(); ++b)
        f << format_double(hist.bin_edges_s[b]) << ','
          << format_double(hist.bin_edges_s[b + 1]) << ',' << hist.counts[b]
          << '\n';
}

void write_fringe_csv(const detection::FringeScan& scan,
                      const std::filesystem::path& path) {
    auto f = open_out(path);
    f << "delta0_hz,counts,counts_err\n";
    for (const auto& p : scan.points)
        f << format_double(p.delta0_hz) << ',' << p.counts << ','
          << format_double(p.counts_err) << '\n';
}

std::string fringe_fit_json(const detection::FringeFit& fit) {
    nlohmann::json j;
    j["V"] = fit.visibility;
    j["V_err"] = fit.visibility_err;
    j["P"] = fit.period_hz;
    j["P_err"] = fit.period_err;
    j["phi0"] = fit.phase0_rad;
    j["phi0_err"] = fit.phase0_err;
    j["offset"] = fit.offset;
    return j.dump(2);
}

void write_text(const std::string& text, const std::filesystem::path& path) {
    auto f = open_out(path);
    f << text;
}

std::uint64_t fnv1a64(const std::string& data) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : data) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

std::string file_hash(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot hash " + path.string());
    std::ostringstream ss;
    ss << f.rdbuf();
    char buf[32];
    std::snprintf(buf, sizeof buf, "%016llx",
                  static_cast<unsigned long long>(fnv1a64(ss.str())));
    return buf;
}

}  // namespace echosim::io
