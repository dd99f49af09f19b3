#include "hamlearn/cli.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <CLI11.hpp>

#include "hamlearn/config.hpp"
#include "hamlearn/dataset.hpp"
#include "hamlearn/errors.hpp"
#include "hamlearn/evaluation.hpp"
#include "hamlearn/models.hpp"
#include "hamlearn/textio.hpp"
#include "hamlearn/training.hpp"

namespace hamlearn::cli {

namespace {

std::vector<int> parse_int_list(const std::string& s) {
    std::vector<int> out;
    std::stringstream ss(s);
    std::string cell;
    while (std::getline(ss, cell, ','))
        if (!cell.empty()) out.push_back(std::stoi(cell));
    return out;
}

struct GenerateArgs {
    ExperimentConfig cfg;
    std::string out;
};

int cmd_generate(const GenerateArgs& a) {
    const double dt = a.cfg.resolved_dt();
    const systems::System sys = systems::make_system(a.cfg.system_id);
    if (a.cfg.n < 1) throw ConfigError("--n must be >= 1");

    const std::uint64_t data_seed = mix_seed(a.cfg.master_seed, "data");
    const std::uint64_t noise_seed = mix_seed(a.cfg.master_seed, "noise");
    training::TrajectoryDataset ds =
        training::generate_dataset(sys, a.cfg.n, a.cfg.m, dt, a.cfg.rtol, a.cfg.atol, data_seed);
    ds = training::add_noise(ds, a.cfg.eps, noise_seed, a.cfg.project_noise);

    const std::string path = out_path(a.out);
    training::save_dataset_csv(ds, path, a.cfg.header_lines());
    const double viol = training::max_constraint_violation(ds);
    std::printf("wrote %s: N=%d M=%d dt=%s", path.c_str(), ds.N, ds.M, fmt_g17(ds.dt).c_str());
    if (ds.k > 0) std::printf(" max-constraint-violation=%s", fmt_g17(viol).c_str());
    std::printf("\n");
    return 0;
}

struct TrainArgs {
    std::string data;
    std::string out;
    std::string history;
    ExperimentConfig cfg;
};

int cmd_train(TrainArgs a) {
    const training::TrajectoryDataset ds = training::load_dataset_csv(a.data);
    if (a.cfg.dt <= 0.0 && a.cfg.t_final <= 0.0) a.cfg.dt = ds.dt; // header bookkeeping
    a.cfg.system_id = ds.prov.system_id;
    a.cfg.n = ds.N;
    a.cfg.m = ds.M;

    std::vector<int> hidden = a.cfg.linear_potential ? std::vector<int>{} : a.cfg.hidden;
    const std::uint64_t init_seed = mix_seed(a.cfg.master_seed, "init");
    models::ModelParams init =
        ds.k > 0 ? models::init_chain(ds.k, hidden, init_seed)
                 : models::init_separable(ds.qdim, hidden, init_seed);

    training::TrainConfig tc = a.cfg.train;
    tc.shuffle_seed = mix_seed(a.cfg.master_seed, "shuffle");
    tc.batch_size = std::min(tc.batch_size, ds.N);
    const training::TrainResult res = training::train(ds, tc, init);

    const std::string model_path = out_path(a.out);
    std::vector<std::pair<std::string, std::string>> meta = {
        {"tool", kToolVersion},
        {"data", a.data},
        {"integrator", integrators::to_string(tc.integrator)},
        {"epochs", std::to_string(tc.epochs)},
        {"batch_size", std::to_string(tc.batch_size)},
        {"lr", fmt_g17(tc.lr)},
        {"mu", fmt_g17(tc.mu)},
        {"seed", std::to_string(a.cfg.master_seed)},
        {"final_loss", fmt_g17(res.final_loss)},
    };
    models::save_model(res.params, model_path, meta);

    if (!a.history.empty()) {
        std::ostringstream os;
        os << a.cfg.header_lines();
        os << "epoch,loss\n";
        for (size_t e = 0; e < res.epoch_loss.size(); ++e)
            os << (e + 1) << "," << fmt_g17(res.epoch_loss[e]) << "\n";
        write_text_file(out_path(a.history), os.str());
    }
    std::printf("wrote %s: final-loss=%s", model_path.c_str(), fmt_g17(res.final_loss).c_str());
    if (ds.k > 0)
        std::printf(" max-stage-violation=%s", fmt_g17(res.max_stage_violation).c_str());
    std::printf("\n");
    return 0;
}

struct EvaluateArgs {
    std::string model;
    std::string system_id;
    evaluation::EvalOptions opts;
    std::string metrics = "e1,e2,drift";
    std::string append;
};

int cmd_evaluate(const EvaluateArgs& a) {
    const models::ModelParams params = models::load_model(a.model);
    const systems::System sys = systems::make_system(a.system_id);
    if (2 * params.qdim != sys.state_dim())
        throw ConfigError("model dimension does not match system '" + a.system_id + "'");

    const bool want_e1 = a.metrics.find("e1") != std::string::npos ||
                         a.metrics.find("drift") != std::string::npos;
    const bool want_e2 = a.metrics.find("e2") != std::string::npos;
    const evaluation::EvalReport rep =
        evaluation::evaluate_model(sys, params, a.opts, want_e1, want_e2);

    if (a.metrics.find("e1") != std::string::npos)
        std::printf("E1 = %s\n", fmt_g17(rep.e1).c_str());
    if (want_e2) std::printf("E2 = %s\n", fmt_g17(rep.e2).c_str());
    if (a.metrics.find("drift") != std::string::npos) {
        if (sys.chain_k() > 0)
            std::printf("max-drift = %s\n", fmt_g17(rep.max_drift).c_str());
        else
            std::printf("max-drift = -\n");
    }

    if (!a.append.empty()) {
        const std::string path = out_path(a.append);
        const bool fresh = !std::filesystem::exists(path);
        std::ofstream f(path, std::ios::app | std::ios::binary);
        if (!f) throw ConfigError("cannot open results file: " + path);
        if (fresh) f << "system,model,n_test,m_test,t_final,seed,e1,e2,max_drift\n";
        f << a.system_id << "," << a.model << "," << rep.n_test << "," << rep.m_test << ","
          << fmt_g17(rep.t_final) << "," << rep.seed << "," << fmt_g17(rep.e1) << ","
          << fmt_g17(rep.e2) << "," << fmt_g17(rep.max_drift) << "\n";
    }
    return 0;
}

struct SweepArgs {
    std::string config;
    std::string out;
    std::string aggregates;
    int jobs = 0;
};

int cmd_sweep(const SweepArgs& a) {
    evaluation::SweepGrid grid = parse_sweep_config(read_text_file(a.config));
    if (a.jobs > 0) grid.jobs = a.jobs;
    const evaluation::SweepResult res = evaluation::run_sweep(grid);

    write_text_file(out_path(a.out), res.records_csv);
    if (!a.aggregates.empty()) write_text_file(out_path(a.aggregates), res.aggregates_csv);

    int ok = 0;
    for (const auto& r : res.records)
        if (r.ok) ++ok;
    std::printf("sweep: %d/%zu runs succeeded; records in %s\n", ok, res.records.size(),
                out_path(a.out).c_str());
    for (const auto& r : res.records)
        if (!r.ok)
            std::fprintf(stderr, "failed: N=%d M=%d eps=%s %s rep=%d: %s\n", r.n, r.m,
                         fmt_g17(r.eps).c_str(), r.integrator.c_str(), r.repeat,
                         r.error.c_str());
    return ok > 0 ? 0 : 5;
}

void attach_experiment_flags(CLI::App* cmd, ExperimentConfig& cfg, std::string& hidden_str,
                             std::string& config_path) {
    cmd->add_option("--config", config_path, "experiment config JSON (flags override it)");
    cmd->add_option("--seed", cfg.master_seed, "master seed");
    cmd->add_option("--epochs", cfg.train.epochs, "training epochs");
    cmd->add_option("--batch", cfg.train.batch_size, "batch size (whole trajectories)");
    cmd->add_option("--lr", cfg.train.lr, "Adam learning rate");
    cmd->add_option("--beta1", cfg.train.beta1, "Adam beta1");
    cmd->add_option("--beta2", cfg.train.beta2, "Adam beta2");
    cmd->add_option("--eps-adam", cfg.train.eps_adam, "Adam epsilon");
    cmd->add_option("--mu", cfg.train.mu, "first-integral regularization weight");
    cmd->add_option("--g-id", cfg.train.first_integral, "first integral id (h1)");
    cmd->add_option("--jobs", cfg.train.jobs, "worker threads");
    cmd->add_option("--hidden", hidden_str, "hidden layer sizes, e.g. 100,100,100");
    cmd->add_flag("--linear-potential", cfg.linear_potential,
                  "model the potential as a single affine layer");
}

} // namespace

int run_cli(const std::vector<std::string>& args) {
    CLI::App app{"learning Hamiltonians of constrained mechanical systems"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(kToolVersion));

    GenerateArgs gen;
    std::string gen_hidden, gen_config; // unused hidden; config supported for uniformity
    auto* g = app.add_subcommand("generate", "sample trajectory segments from a reference system");
    g->add_option("--system", gen.cfg.system_id, "quartic|decoupled|pendulum-k1|pendulum-k2");
    g->add_option("--n", gen.cfg.n, "number of trajectories");
    g->add_option("--m", gen.cfg.m, "points per trajectory");
    g->add_option("--dt", gen.cfg.dt, "time step (exclusive with --t-final)");
    g->add_option("--t-final", gen.cfg.t_final, "final time; dt = T/(M-1)");
    g->add_option("--eps", gen.cfg.eps, "noise magnitude");
    g->add_flag("--project-noise", gen.cfg.project_noise, "re-project noisy chain states");
    g->add_option("--rtol", gen.cfg.rtol, "reference integrator rtol");
    g->add_option("--atol", gen.cfg.atol, "reference integrator atol");
    g->add_option("--seed", gen.cfg.master_seed, "master seed");
    g->add_option("--config", gen_config, "experiment config JSON (flags override it)");
    g->add_option("--out", gen.out, "output dataset CSV")->required();

    TrainArgs tra;
    std::string tr_hidden, tr_config;
    auto* t = app.add_subcommand("train", "fit a Hamiltonian model to a dataset");
    t->add_option("--data", tra.data, "dataset CSV from 'generate'")->required();
    t->add_option("--integrator", [&tra](const std::vector<std::string>& v) {
         tra.cfg.train.integrator = integrators::parse_stepper(v.back());
         return true;
     },
     "training integrator: ee|rk4|sv|le|cf4");
    attach_experiment_flags(t, tra.cfg, tr_hidden, tr_config);
    t->add_option("--out", tra.out, "output model file")->required();
    t->add_option("--history", tra.history, "per-epoch loss CSV");

    EvaluateArgs ev;
    auto* e = app.add_subcommand("evaluate", "score a model against a reference system");
    e->add_option("--model", ev.model, "model file")->required();
    e->add_option("--system", ev.system_id, "reference system id")->required();
    e->add_option("--n-test", ev.opts.n_test, "test initial conditions");
    e->add_option("--m-test", ev.opts.m_test, "points per test trajectory");
    e->add_option("--t-final", ev.opts.t_final, "test horizon");
    e->add_option("--rtol", ev.opts.rtol, "reference integrator rtol");
    e->add_option("--atol", ev.opts.atol, "reference integrator atol");
    e->add_option("--seed", ev.opts.seed, "test seed");
    e->add_option("--metrics", ev.metrics, "subset of e1,e2,drift");
    e->add_option("--append", ev.append, "append a CSV row to this file");

    SweepArgs sw;
    auto* s = app.add_subcommand("sweep", "run a parameter-study grid");
    s->add_option("--config", sw.config, "sweep config JSON")->required();
    s->add_option("--out", sw.out, "per-run records CSV")->required();
    s->add_option("--aggregates", sw.aggregates, "aggregate CSV");
    s->add_option("--jobs", sw.jobs, "parallel runs");

    std::vector<char*> argv;
    std::vector<std::string> storage;
    storage.reserve(args.size() + 1);
    storage.push_back("hamlearn");
    for (const auto& a : args) storage.push_back(a);
    for (auto& sarg : storage) argv.push_back(sarg.data());

    try {
        app.parse(static_cast<int>(argv.size()), argv.data());

        auto apply_config = [](const std::string& path, CLI::App* cmd, ExperimentConfig& cfg,
                               const std::string& hidden_str) {
            if (!path.empty()) {
                // JSON is the base; explicitly given flags win
                ExperimentConfig merged = parse_experiment_config(read_text_file(path));
                auto touched = [&](const std::string& name) {
                    const CLI::Option* o = cmd->get_option_no_throw(name);
                    return o != nullptr && o->count() > 0;
                };
                if (touched("--system")) merged.system_id = cfg.system_id;
                if (touched("--n")) merged.n = cfg.n;
                if (touched("--m")) merged.m = cfg.m;
                if (touched("--dt")) { merged.dt = cfg.dt; merged.t_final = 0; }
                if (touched("--t-final")) { merged.t_final = cfg.t_final; merged.dt = 0; }
                if (touched("--eps")) merged.eps = cfg.eps;
                if (touched("--project-noise")) merged.project_noise = cfg.project_noise;
                if (touched("--rtol")) merged.rtol = cfg.rtol;
                if (touched("--atol")) merged.atol = cfg.atol;
                if (touched("--seed")) merged.master_seed = cfg.master_seed;
                if (touched("--integrator")) merged.train.integrator = cfg.train.integrator;
                if (touched("--epochs")) merged.train.epochs = cfg.train.epochs;
                if (touched("--batch")) merged.train.batch_size = cfg.train.batch_size;
                if (touched("--lr")) merged.train.lr = cfg.train.lr;
                if (touched("--beta1")) merged.train.beta1 = cfg.train.beta1;
                if (touched("--beta2")) merged.train.beta2 = cfg.train.beta2;
                if (touched("--eps-adam")) merged.train.eps_adam = cfg.train.eps_adam;
                if (touched("--mu")) merged.train.mu = cfg.train.mu;
                if (touched("--g-id")) merged.train.first_integral = cfg.train.first_integral;
                if (touched("--jobs")) merged.train.jobs = cfg.train.jobs;
                if (touched("--linear-potential")) merged.linear_potential = cfg.linear_potential;
                cfg = merged;
            }
            if (!hidden_str.empty()) cfg.hidden = parse_int_list(hidden_str);
        };

        if (g->parsed()) {
            apply_config(gen_config, g, gen.cfg, gen_hidden);
            return cmd_generate(gen);
        }
        if (t->parsed()) {
            apply_config(tr_config, t, tra.cfg, tr_hidden);
            return cmd_train(tra);
        }
        if (e->parsed()) return cmd_evaluate(ev);
        if (s->parsed()) return cmd_sweep(sw);
        return 2;
    } catch (const CLI::ParseError& pe) {
        const int code = app.exit(pe);
        return code == 0 ? 0 : 2;
    } catch (const ConfigError& ex) {
        std::fprintf(stderr, "config error: %s\n", ex.what());
        return 2;
    } catch (const FormatError& ex) {
        std::fprintf(stderr, "file format error: %s\n", ex.what());
        return 2;
    } catch (const std::invalid_argument& ex) {
        std::fprintf(stderr, "config error: %s\n", ex.what());
        return 2;
    } catch (const IntegrationError& ex) {
        std::fprintf(stderr, "integration error: %s\n", ex.what());
        return 3;
    } catch (const TrainingError& ex) {
        std::fprintf(stderr, "training error: %s\n", ex.what());
        return 4;
    } catch (const SolveError& ex) {
        std::fprintf(stderr, "numerical error: %s\n", ex.what());
        return 4;
    }
}

} // namespace hamlearn::cli
