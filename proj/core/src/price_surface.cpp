#include "smm/price_surface.hpp"

#include <cinttypes>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "smm/errors.hpp"

namespace smm {

using nlohmann::json;

void write_surface_csv(const PriceSurface& surface, const std::string& path) {
    std::FILE* f = std::fopen(path.c_str(), "wb");
    if (!f) throw DomainError("cannot open for writing: " + path);
    std::fputs("n,t,m,s,regime,phi\n", f);
    const auto& g = surface.grid;
    for (int n = 0; n <= g.n_steps; ++n)
        for (int m = 0; m <= g.m_max; ++m)
            for (int i = 0; i < surface.num_regimes; ++i)
                std::fprintf(f, "%d,%.17g,%d,%.17g,%d,%.17g\n", n, g.time(n), m, g.stock(m), i + 1,
                             surface.phi(n, m, i));
    std::fclose(f);
}

void write_surface_meta(const PriceSurface& surface, const std::string& path) {
    json j;
    j["dt"] = surface.grid.dt;
    j["ds"] = surface.grid.ds;
    j["horizon"] = surface.grid.horizon;
    j["n_steps"] = surface.grid.n_steps;
    j["m_max"] = surface.grid.m_max;
    j["kernel_rule"] =
        surface.grid.kernel_rule == KernelRule::CellIntegrated ? "cell_integrated" : "point_density";
    j["num_regimes"] = surface.num_regimes;
    char fp[32];
    std::snprintf(fp, sizeof fp, "%016" PRIx64, surface.spec_fingerprint);
    j["spec_fingerprint"] = fp;
    j["max_truncation_tail"] = surface.max_truncation_tail;
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DomainError("cannot open for writing: " + path);
    out << j.dump(2) << '\n';
}

PriceSurface load_surface(const std::string& csv_path, const std::string& meta_path) {
    std::ifstream meta_in(meta_path);
    if (!meta_in) throw DomainError("cannot open surface metadata: " + meta_path);
    json meta;
    try {
        meta_in >> meta;
    } catch (const json::exception& e) {
        throw DomainError(std::string("surface metadata parse error: ") + e.what());
    }

    PriceSurface s;
    try {
        s.grid.dt = meta.at("dt").get<double>();
        s.grid.ds = meta.at("ds").get<double>();
        s.grid.horizon = meta.at("horizon").get<double>();
        s.grid.n_steps = meta.at("n_steps").get<int>();
        s.grid.m_max = meta.at("m_max").get<int>();
        s.grid.kernel_rule = meta.at("kernel_rule").get<std::string>() == "point_density"
                                 ? KernelRule::PointDensity
                                 : KernelRule::CellIntegrated;
        s.num_regimes = meta.at("num_regimes").get<int>();
        s.spec_fingerprint = std::stoull(meta.at("spec_fingerprint").get<std::string>(), nullptr, 16);
        s.max_truncation_tail = meta.at("max_truncation_tail").get<double>();
    } catch (const json::exception& e) {
        throw DomainError(std::string("surface metadata shape error: ") + e.what());
    }
    s.values.assign(static_cast<std::size_t>(s.grid.n_steps + 1) * (s.grid.m_max + 1) *
                        s.num_regimes,
                    0.0);

    std::ifstream in(csv_path);
    if (!in) throw DomainError("cannot open surface CSV: " + csv_path);
    std::string line;
    std::getline(in, line); // header
    std::size_t rows = 0;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        int n = 0, m = 0, regime = 0;
        double t = 0, stock = 0, phi = 0;
        if (std::sscanf(line.c_str(), "%d,%lg,%d,%lg,%d,%lg", &n, &t, &m, &stock, &regime, &phi) != 6)
            throw DomainError("malformed surface CSV row: " + line);
        if (n < 0 || n > s.grid.n_steps || m < 0 || m > s.grid.m_max || regime < 1 ||
            regime > s.num_regimes)
            throw DomainError("surface CSV row out of range: " + line);
        s.phi(n, m, regime - 1) = phi;
        ++rows;
    }
    const std::size_t expect = static_cast<std::size_t>(s.grid.n_steps + 1) * (s.grid.m_max + 1) *
                               s.num_regimes;
    if (rows != expect)
        throw DomainError("surface CSV has " + std::to_string(rows) + " rows, expected " +
                          std::to_string(expect));
    return s;
}

std::string meta_path_for(const std::string& csv_path) {
    const auto dot = csv_path.rfind(".csv");
    if (dot != std::string::npos && dot == csv_path.size() - 4)
        return csv_path.substr(0, dot) + ".meta.json";
    return csv_path + ".meta.json";
}

} // namespace smm
