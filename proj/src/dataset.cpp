#include "hamlearn/dataset.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "hamlearn/errors.hpp"
#include "hamlearn/geometry.hpp"
#include "hamlearn/integrators.hpp"
#include "hamlearn/textio.hpp"

namespace hamlearn::training {

TrajectoryDataset generate_dataset(const systems::System& sys, const Sampler& sampler, int n_traj,
                                   int m_points, double dt, double rtol, double atol,
                                   std::uint64_t seed) {
    if (n_traj < 1) throw ConfigError("generate_dataset: N must be >= 1");
    if (m_points < 2) throw ConfigError("generate_dataset: M must be >= 2");
    if (!(dt > 0)) throw ConfigError("generate_dataset: dt must be positive");

    TrajectoryDataset ds;
    ds.N = n_traj;
    ds.M = m_points;
    ds.dt = dt;
    ds.qdim = sys.qdim();
    ds.k = sys.chain_k();
    ds.prov.system_id = sys.id();
    ds.prov.rtol = rtol;
    ds.prov.atol = atol;
    ds.prov.seed = seed;
    ds.states.resize(static_cast<size_t>(n_traj) * m_points * ds.state_dim());

    std::vector<double> times(static_cast<size_t>(m_points));
    for (int j = 0; j < m_points; ++j) times[j] = j * dt;

    Rng rng(seed);
    const integrators::Field field = [&sys](std::span<const double> x) {
        return systems::true_field(sys, x);
    };
    for (int i = 0; i < n_traj; ++i) {
        const std::vector<double> x0 = sampler(rng);
        integrators::Trajectory tr;
        try {
            tr = integrators::integrate_reference(field, x0, times, rtol, atol);
        } catch (const std::exception& e) {
            throw IntegrationError("generate_dataset: trajectory " + std::to_string(i) +
                                   " failed: " + e.what());
        }
        for (int j = 0; j < m_points; ++j) {
            auto dst = ds.state(i, j);
            std::copy(tr.states[j].begin(), tr.states[j].end(), dst.begin());
        }
    }
    return ds;
}

TrajectoryDataset generate_dataset(const systems::System& sys, int n_traj, int m_points,
                                   double dt, double rtol, double atol, std::uint64_t seed) {
    const Sampler sampler = [&sys](Rng& rng) { return systems::sample_ic(sys, rng); };
    return generate_dataset(sys, sampler, n_traj, m_points, dt, rtol, atol, seed);
}

TrajectoryDataset add_noise(const TrajectoryDataset& ds, double eps, std::uint64_t seed,
                            bool project) {
    if (eps < 0) throw ConfigError("add_noise: eps must be >= 0");
    TrajectoryDataset out = ds;
    out.prov.eps = eps;
    out.prov.noise_seed = seed;
    out.prov.noise_projected = project;
    if (eps == 0.0) return out;
    Rng rng(seed);
    for (int i = 0; i < ds.N; ++i) {
        for (int j = 1; j < ds.M; ++j) {
            auto s = out.state(i, j);
            for (double& v : s) v += eps * rng.normal();
            if (project && ds.k > 0) {
                for (int c = 0; c < ds.k; ++c) {
                    double* q = s.data() + 3 * c;
                    double* p = s.data() + 3 * (ds.k + c);
                    const double nrm = std::sqrt(q[0] * q[0] + q[1] * q[1] + q[2] * q[2]);
                    for (int a = 0; a < 3; ++a) q[a] /= nrm;
                    const double qp = q[0] * p[0] + q[1] * p[1] + q[2] * p[2];
                    for (int a = 0; a < 3; ++a) p[a] -= qp * q[a];
                }
            }
        }
    }
    return out;
}

double max_constraint_violation(const TrajectoryDataset& ds) {
    if (ds.k == 0) return 0.0;
    double worst = 0.0;
    for (int i = 0; i < ds.N; ++i)
        for (int j = 0; j < ds.M; ++j)
            worst = std::max(worst, geom::constraint_violation(ds.state(i, j), ds.k));
    return worst;
}

void save_dataset_csv(const TrajectoryDataset& ds, const std::string& path,
                      const std::string& extra_header) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw ConfigError("cannot open dataset file for writing: " + path);
    f << "# hamlearn-dataset v1\n";
    f << "# system=" << ds.prov.system_id << "\n";
    f << "# N=" << ds.N << "\n";
    f << "# M=" << ds.M << "\n";
    f << "# dt=" << fmt_g17(ds.dt) << "\n";
    f << "# qdim=" << ds.qdim << "\n";
    f << "# k=" << ds.k << "\n";
    f << "# integrator=" << ds.prov.integrator_id << "\n";
    f << "# rtol=" << fmt_g17(ds.prov.rtol) << "\n";
    f << "# atol=" << fmt_g17(ds.prov.atol) << "\n";
    f << "# seed=" << ds.prov.seed << "\n";
    f << "# eps=" << fmt_g17(ds.prov.eps) << "\n";
    f << "# noise_seed=" << ds.prov.noise_seed << "\n";
    f << "# noise_projected=" << (ds.prov.noise_projected ? 1 : 0) << "\n";
    if (!extra_header.empty()) f << extra_header;
    f << "traj_id,step,t";
    for (int c = 1; c <= ds.qdim; ++c) f << ",q_" << c;
    for (int c = 1; c <= ds.qdim; ++c) f << ",p_" << c;
    f << "\n";
    for (int i = 0; i < ds.N; ++i) {
        for (int j = 0; j < ds.M; ++j) {
            f << i << "," << j << "," << fmt_g17(j * ds.dt);
            for (double v : ds.state(i, j)) f << "," << fmt_g17(v);
            f << "\n";
        }
    }
}

TrajectoryDataset load_dataset_csv(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ConfigError("cannot open dataset file: " + path);
    TrajectoryDataset ds;
    std::string line;
    bool have_header = false;
    size_t row = 0;
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        if (line[0] == '#') {
            const size_t eq = line.find('=');
            if (eq == std::string::npos) continue;
            std::string key = line.substr(2, eq - 2);
            std::string val = line.substr(eq + 1);
            if (key == "system") ds.prov.system_id = val;
            else if (key == "N") ds.N = std::stoi(val);
            else if (key == "M") ds.M = std::stoi(val);
            else if (key == "dt") ds.dt = std::stod(val);
            else if (key == "qdim") ds.qdim = std::stoi(val);
            else if (key == "k") ds.k = std::stoi(val);
            else if (key == "integrator") ds.prov.integrator_id = val;
            else if (key == "rtol") ds.prov.rtol = std::stod(val);
            else if (key == "atol") ds.prov.atol = std::stod(val);
            else if (key == "seed") ds.prov.seed = std::stoull(val);
            else if (key == "eps") ds.prov.eps = std::stod(val);
            else if (key == "noise_seed") ds.prov.noise_seed = std::stoull(val);
            else if (key == "noise_projected") ds.prov.noise_projected = val == "1";
            continue;
        }
        if (!have_header) { // column header row
            have_header = true;
            if (ds.N <= 0 || ds.M < 2 || ds.qdim <= 0)
                throw FormatError("dataset file: incomplete provenance header");
            ds.states.assign(static_cast<size_t>(ds.N) * ds.M * ds.state_dim(), 0.0);
            continue;
        }
        std::stringstream ss(line);
        std::string cell;
        std::vector<double> vals;
        vals.reserve(static_cast<size_t>(ds.state_dim()) + 3);
        while (std::getline(ss, cell, ',')) vals.push_back(std::stod(cell));
        if (static_cast<int>(vals.size()) != ds.state_dim() + 3)
            throw FormatError("dataset file: bad row width at data row " + std::to_string(row));
        const int i = static_cast<int>(vals[0]);
        const int j = static_cast<int>(vals[1]);
        if (i < 0 || i >= ds.N || j < 0 || j >= ds.M)
            throw FormatError("dataset file: row indices out of range");
        auto dst = ds.state(i, j);
        std::copy(vals.begin() + 3, vals.end(), dst.begin());
        ++row;
    }
    if (row != static_cast<size_t>(ds.N) * ds.M)
        throw FormatError("dataset file: expected " + std::to_string(ds.N * ds.M) +
                          " rows, found " + std::to_string(row));
    return ds;
}

} // namespace hamlearn::training
