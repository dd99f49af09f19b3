#include "hamlearn/config.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "hamlearn/errors.hpp"
#include "hamlearn/textio.hpp"

namespace hamlearn::cli {

using json = nlohmann::json;

double ExperimentConfig::resolved_dt() const {
    const bool have_dt = dt > 0.0, have_t = t_final > 0.0;
    if (have_dt == have_t)
        throw ConfigError("exactly one of dt and t_final must be given");
    if (m < 2) throw ConfigError("m must be >= 2");
    return have_dt ? dt : t_final / (m - 1);
}

std::string ExperimentConfig::header_lines() const {
    std::ostringstream os;
    os << "# tool=" << kToolVersion << "\n";
    os << "# config.system=" << system_id << "\n";
    os << "# config.n=" << n << "\n";
    os << "# config.m=" << m << "\n";
    os << "# config.dt=" << fmt_g17(resolved_dt()) << "\n";
    os << "# config.eps=" << fmt_g17(eps) << "\n";
    os << "# config.project_noise=" << (project_noise ? 1 : 0) << "\n";
    os << "# config.rtol=" << fmt_g17(rtol) << "\n";
    os << "# config.atol=" << fmt_g17(atol) << "\n";
    os << "# config.seed=" << master_seed << "\n";
    os << "# config.hidden=";
    for (size_t i = 0; i < hidden.size(); ++i) os << (i ? "," : "") << hidden[i];
    os << "\n";
    os << "# config.linear_potential=" << (linear_potential ? 1 : 0) << "\n";
    os << "# config.train.integrator=" << integrators::to_string(train.integrator) << "\n";
    os << "# config.train.epochs=" << train.epochs << "\n";
    os << "# config.train.batch_size=" << train.batch_size << "\n";
    os << "# config.train.lr=" << fmt_g17(train.lr) << "\n";
    os << "# config.train.beta1=" << fmt_g17(train.beta1) << "\n";
    os << "# config.train.beta2=" << fmt_g17(train.beta2) << "\n";
    os << "# config.train.eps_adam=" << fmt_g17(train.eps_adam) << "\n";
    os << "# config.train.mu=" << fmt_g17(train.mu) << "\n";
    os << "# config.train.first_integral=" << train.first_integral << "\n";
    os << "# config.eval.n_test=" << eval.n_test << "\n";
    os << "# config.eval.m_test=" << eval.m_test << "\n";
    os << "# config.eval.t_final=" << fmt_g17(eval.t_final) << "\n";
    return os.str();
}

namespace {

void check_keys(const json& j, const std::set<std::string>& allowed, const std::string& where) {
    for (auto it = j.begin(); it != j.end(); ++it)
        if (!allowed.count(it.key()))
            throw ConfigError("unknown key '" + it.key() + "' in " + where);
}

training::TrainConfig parse_train_block(const json& j) {
    training::TrainConfig cfg;
    check_keys(j,
               {"integrator", "epochs", "batch_size", "lr", "beta1", "beta2", "eps_adam", "mu",
                "reg_indices", "first_integral", "jobs"},
               "train");
    if (j.contains("integrator"))
        cfg.integrator = integrators::parse_stepper(j["integrator"].get<std::string>());
    if (j.contains("epochs")) cfg.epochs = j["epochs"].get<int>();
    if (j.contains("batch_size")) cfg.batch_size = j["batch_size"].get<int>();
    if (j.contains("lr")) cfg.lr = j["lr"].get<double>();
    if (j.contains("beta1")) cfg.beta1 = j["beta1"].get<double>();
    if (j.contains("beta2")) cfg.beta2 = j["beta2"].get<double>();
    if (j.contains("eps_adam")) cfg.eps_adam = j["eps_adam"].get<double>();
    if (j.contains("mu")) cfg.mu = j["mu"].get<double>();
    if (j.contains("reg_indices")) cfg.reg_indices = j["reg_indices"].get<std::vector<int>>();
    if (j.contains("first_integral")) cfg.first_integral = j["first_integral"].get<std::string>();
    if (j.contains("jobs")) cfg.jobs = j["jobs"].get<int>();
    return cfg;
}

evaluation::EvalOptions parse_eval_block(const json& j) {
    evaluation::EvalOptions opts;
    check_keys(j, {"n_test", "m_test", "t_final", "rtol", "atol"}, "eval");
    if (j.contains("n_test")) opts.n_test = j["n_test"].get<int>();
    if (j.contains("m_test")) opts.m_test = j["m_test"].get<int>();
    if (j.contains("t_final")) opts.t_final = j["t_final"].get<double>();
    if (j.contains("rtol")) opts.rtol = j["rtol"].get<double>();
    if (j.contains("atol")) opts.atol = j["atol"].get<double>();
    return opts;
}

json parse_json(const std::string& text, const std::string& what) {
    try {
        return json::parse(text);
    } catch (const json::exception& e) {
        throw ConfigError(what + ": JSON parse error: " + e.what());
    }
}

} // namespace

ExperimentConfig parse_experiment_config(const std::string& json_text) {
    const json j = parse_json(json_text, "experiment config");
    ExperimentConfig cfg;
    check_keys(j,
               {"system", "n", "m", "dt", "t_final", "eps", "project_noise", "rtol", "atol",
                "seed", "hidden", "linear_potential", "train", "eval"},
               "experiment config");
    if (j.contains("system")) cfg.system_id = j["system"].get<std::string>();
    if (j.contains("n")) cfg.n = j["n"].get<int>();
    if (j.contains("m")) cfg.m = j["m"].get<int>();
    if (j.contains("dt")) cfg.dt = j["dt"].get<double>();
    if (j.contains("t_final")) cfg.t_final = j["t_final"].get<double>();
    if (j.contains("eps")) cfg.eps = j["eps"].get<double>();
    if (j.contains("project_noise")) cfg.project_noise = j["project_noise"].get<bool>();
    if (j.contains("rtol")) cfg.rtol = j["rtol"].get<double>();
    if (j.contains("atol")) cfg.atol = j["atol"].get<double>();
    if (j.contains("seed")) cfg.master_seed = j["seed"].get<std::uint64_t>();
    if (j.contains("hidden")) cfg.hidden = j["hidden"].get<std::vector<int>>();
    if (j.contains("linear_potential")) cfg.linear_potential = j["linear_potential"].get<bool>();
    if (j.contains("train")) cfg.train = parse_train_block(j["train"]);
    if (j.contains("eval")) cfg.eval = parse_eval_block(j["eval"]);
    return cfg;
}

evaluation::SweepGrid parse_sweep_config(const std::string& json_text) {
    const json j = parse_json(json_text, "sweep config");
    evaluation::SweepGrid grid;
    check_keys(j,
               {"system", "grid", "repeats", "seed", "t_final", "hidden", "train", "eval",
                "jobs"},
               "sweep config");
    if (j.contains("system")) grid.system_id = j["system"].get<std::string>();
    if (!j.contains("grid")) throw ConfigError("sweep config: missing 'grid'");
    const json& g = j["grid"];
    check_keys(g, {"n", "m", "eps", "integrators"}, "sweep grid");
    grid.n_values = g.at("n").get<std::vector<int>>();
    grid.m_values = g.at("m").get<std::vector<int>>();
    grid.eps_values = g.at("eps").get<std::vector<double>>();
    for (const auto& s : g.at("integrators"))
        grid.integrators.push_back(integrators::parse_stepper(s.get<std::string>()));
    if (j.contains("repeats")) grid.repeats = j["repeats"].get<int>();
    if (j.contains("seed")) grid.base_seed = j["seed"].get<std::uint64_t>();
    if (j.contains("t_final")) grid.t_final = j["t_final"].get<double>();
    if (j.contains("hidden")) grid.hidden = j["hidden"].get<std::vector<int>>();
    if (j.contains("train")) grid.train = parse_train_block(j["train"]);
    if (j.contains("eval")) grid.eval = parse_eval_block(j["eval"]);
    if (j.contains("jobs")) grid.jobs = j["jobs"].get<int>();
    return grid;
}

std::string read_text_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw ConfigError("cannot open file: " + path);
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw ConfigError("cannot open file for writing: " + path);
    f << content;
}

std::string out_path(const std::string& path) {
    const char* dir = std::getenv("HAMLEARN_OUT_DIR");
    if (!dir || !*dir) return path;
    const std::filesystem::path p(path);
    if (p.is_absolute()) return path;
    return (std::filesystem::path(dir) / p).string();
}

} // namespace hamlearn::cli
