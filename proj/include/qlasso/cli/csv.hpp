#pragma once

#include "qlasso/cli/hash.hpp"
#include "qlasso/experiment.hpp"

#include <cstdio>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

namespace qlasso::cli {

inline constexpr const char *curve_header = "estimator,m,mean_err,std_err,trials,seed_hash";

/// 17 significant digits, enough to round-trip any double.
inline std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

/// Identifies the random substream family of one curve point.
inline std::string seed_hash(std::uint64_t master_seed, long m) {
    return hex64(master_stream(master_seed).substream(static_cast<std::uint64_t>(m)).key());
}

/// Leading comment recorded in every emitted file.
inline std::string provenance_line(std::string_view command, std::uint64_t master_seed,
                                   std::string_view config_hash) {
    return "# qlasso " + std::string(command) + " master_seed=" + std::to_string(master_seed) +
           " config_hash=" + std::string(config_hash);
}

inline void write_curves_csv(std::ostream &os, const std::vector<ErrorCurve> &curves,
                             const std::string &provenance) {
    os << provenance << '\n' << curve_header << '\n';
    for (const auto &c : curves)
        for (const auto &p : c.points)
            os << c.estimator << ',' << p.m << ',' << format_double(p.mean) << ','
               << format_double(p.std) << ',' << p.trials << ','
               << seed_hash(c.config.master_seed, p.m) << '\n';
}

namespace detail {

inline std::vector<std::string> split(const std::string &line, char sep = ',') {
    std::vector<std::string> out;
    std::string field;
    std::istringstream is(line);
    while (std::getline(is, field, sep))
        out.push_back(field);
    if (!line.empty() && line.back() == sep)
        out.emplace_back();
    return out;
}

} // namespace detail

/// Parses a curve CSV back into one ErrorCurve per estimator, in order of
/// first appearance. Comment lines start with '#'.
inline std::vector<ErrorCurve> read_curves_csv(std::istream &is) {
    std::vector<ErrorCurve> curves;
    std::map<std::string, std::size_t> index;
    std::string line;
    bool header_seen = false;
    long line_no = 0;
    while (std::getline(is, line)) {
        ++line_no;
        if (line.empty() || line.front() == '#')
            continue;
        if (!header_seen) {
            if (line != curve_header)
                throw std::runtime_error("curve CSV: unexpected header '" + line + "'");
            header_seen = true;
            continue;
        }
        const auto f = detail::split(line);
        if (f.size() != 6)
            throw std::runtime_error("curve CSV line " + std::to_string(line_no) +
                                     ": expected 6 fields");
        auto [it, inserted] = index.try_emplace(f[0], curves.size());
        if (inserted)
            curves.push_back({f[0], {}, {}});
        curves[it->second].points.push_back(
            {std::stol(f[1]), std::stod(f[2]), std::stod(f[3]), std::stol(f[4])});
    }
    if (!header_seen)
        throw std::runtime_error("curve CSV: missing header");
    return curves;
}

inline void write_rates_csv(std::ostream &os,
                            const std::vector<std::pair<std::string, RateFit>> &fits,
                            const std::string &provenance) {
    os << provenance << '\n' << "estimator,model,coefficient,slope,residual_rms\n";
    for (const auto &[label, fit] : fits)
        os << label << ',' << to_string(fit.model) << ',' << format_double(fit.coefficient)
           << ',' << format_double(fit.slope) << ',' << format_double(fit.residual_rms) << '\n';
}

inline void write_delta_csv(std::ostream &os, const std::vector<DeltaCurve> &curves,
                            std::uint64_t master_seed, const std::string &provenance) {
    os << provenance << '\n' << "estimator,m,delta,mean_err,std_err,trials,seed_hash\n";
    for (const auto &c : curves)
        for (const auto &p : c.points)
            os << c.estimator << ',' << c.m << ',' << format_double(p.delta) << ','
               << format_double(p.mean) << ',' << format_double(p.std) << ',' << p.trials << ','
               << seed_hash(master_seed, c.m) << '\n';
}

} // namespace qlasso::cli
