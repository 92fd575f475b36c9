// ren: command-line front end.
//
//   ren run --config run.cfg --set lambda_d=0.05 --out-dir out/
//   ren ablate --env syn-l --seeds 3
//   ren sweep --lambda-grid 0.001,0.01,0.1
//   ren regret-bench --t-grid 1000,10000,100000
//   ren bound-check --trials 2000
//   ren gen-env --env syn-m --seed 4
//
// Settings are resolved as: config file or manifest, then REN_SEED, then
// flags (later wins). Every subcommand writes its artifacts plus
// manifest.json into the output directory.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ren/config.hpp"
#include "ren/error.hpp"
#include "ren/harness.hpp"
#include "ren/syn_env.hpp"

namespace fs = std::filesystem;
using ren::KeyValues;

namespace {

struct FlagKey {
    std::string flag;
    std::string key;
    std::string help;
};

// Convenience flags; each one is shorthand for `--set key=value`.
const std::vector<FlagKey>& flag_keys() {
    static const std::vector<FlagKey> flags = {
        {"--env", "env", "syn-s | syn-m | syn-l | replay"},
        {"--replay-path", "replay_path", "impression/click log (replay env)"},
        {"--intervals", "intervals", "replay time intervals"},
        {"--policy", "policy", "ren | ren-12 | ren-13 | relevance | random | oracle | ren-theory"},
        {"--lambda-d", "lambda_d", "diversity weight"},
        {"--lambda-u", "lambda_u", "uncertainty weight (default sqrt(10) * lambda_d)"},
        {"--lambda-grid", "lambda_grid", "comma-separated lambda_d values (sweep)"},
        {"--delta", "delta", "confidence parameter"},
        {"--slate-size", "slate_size", "items per slate"},
        {"--rounds", "rounds", "interaction rounds"},
        {"--seeds", "n_seeds", "number of seeds"},
        {"--threads", "threads", "worker threads"},
        {"--learning-rate", "learning_rate", "SGD learning rate"},
        {"--dim", "dim", "embedding / latent dimension"},
        {"--n-arms", "n_arms", "arms (regret-bench, bound-check)"},
        {"--t-grid", "t_grid", "comma-separated horizons (regret-bench)"},
        {"--horizon", "horizon", "horizon T (bound-check)"},
        {"--trials", "trials", "Monte Carlo trials (bound-check)"},
    };
    return flags;
}

struct CommonOptions {
    std::string config_path;
    std::string manifest_path;
    std::vector<std::string> sets;
    std::string out_dir;
    std::optional<std::uint64_t> seed;
    bool verbose = false;
    std::map<std::string, std::string> flag_values;  // key -> raw value
};

void add_common(CLI::App* sub, CommonOptions& o) {
    auto* cfg = sub->add_option("--config", o.config_path, "key = value config file");
    auto* man = sub->add_option("--manifest", o.manifest_path, "rerun from a manifest.json");
    cfg->excludes(man);
    sub->add_option("--set", o.sets, "override, key=value (repeatable)");
    sub->add_option("--out-dir", o.out_dir, "output directory");
    sub->add_option("--seed", o.seed, "master seed");
    sub->add_flag("--verbose", o.verbose, "progress on stderr");
    for (const auto& f : flag_keys()) {
        sub->add_option_function<std::string>(
            f.flag, [&o, key = f.key](const std::string& v) { o.flag_values[key] = v; }, f.help);
    }
}

KeyValues resolve(const std::string& subcommand, const CommonOptions& o) {
    KeyValues kv;
    if (!o.manifest_path.empty()) {
        const ren::Manifest m = ren::parse_manifest(ren::read_file(o.manifest_path));
        if (m.subcommand != subcommand)
            throw ren::InvalidArgument("manifest was written by '" + m.subcommand + "', not '" + subcommand + "'");
        kv = m.config;
    }
    if (!o.config_path.empty()) kv = ren::load_key_values(o.config_path);
    if (const char* env_seed = std::getenv("REN_SEED"); env_seed != nullptr && *env_seed != '\0')
        kv["seed"] = env_seed;
    for (const auto& [key, value] : o.flag_values) kv[key] = value;
    std::vector<std::string> bad;
    for (const auto& s : o.sets) {
        const auto eq = s.find('=');
        if (eq == std::string::npos || eq == 0) {
            bad.push_back("--set expects key=value, got '" + s + "'");
            continue;
        }
        kv[s.substr(0, eq)] = s.substr(eq + 1);
    }
    if (o.seed) kv["seed"] = std::to_string(*o.seed);
    if (!o.out_dir.empty()) kv["out_dir"] = o.out_dir;
    if (!bad.empty()) {
        std::string msg = "invalid overrides:";
        for (const auto& b : bad) msg += "\n  - " + b;
        throw ren::InvalidArgument(msg);
    }
    ren::check_known_keys(kv, ren::keys_for(subcommand));
    return kv;
}

fs::path take_out_dir(KeyValues& kv) {
    fs::path dir = "out";
    if (const auto it = kv.find("out_dir"); it != kv.end()) {
        dir = it->second;
        kv.erase(it);
    }
    return dir;
}

void throw_if(const std::vector<std::string>& errors) {
    if (errors.empty()) return;
    std::string msg = "config errors:";
    for (const auto& e : errors) msg += "\n  - " + e;
    throw ren::InvalidArgument(msg);
}

class Outputs {
public:
    Outputs(fs::path dir, std::string subcommand, KeyValues config)
        : dir_(std::move(dir)) {
        manifest_.subcommand = std::move(subcommand);
        manifest_.config = std::move(config);
        manifest_.input_hashes["config"] = ren::git_blob_sha1(ren::format_key_values(manifest_.config));
    }

    fs::path prepare(const std::string& name) {
        fs::create_directories(dir_);
        names_.push_back(name);
        return dir_ / name;
    }

    void add_input(const std::string& label, const fs::path& path) {
        manifest_.input_hashes[label] = ren::git_blob_sha1(ren::read_file(path));
    }

    void set_seeds(std::vector<std::uint64_t> seeds) { manifest_.seeds = std::move(seeds); }

    void finish() {
        for (const auto& n : names_) manifest_.output_hashes[n] = ren::git_blob_sha1(ren::read_file(dir_ / n));
        fs::create_directories(dir_);
        std::ofstream out(dir_ / "manifest.json", std::ios::binary | std::ios::trunc);
        out << ren::manifest_json(manifest_);
        if (!out) throw ren::InvalidArgument("cannot write " + (dir_ / "manifest.json").string());
    }

private:
    fs::path dir_;
    ren::Manifest manifest_;
    std::vector<std::string> names_;
};

std::vector<std::uint64_t> seed_list(const ren::ExperimentConfig& c) {
    std::vector<std::uint64_t> s;
    for (std::size_t i = 0; i < c.n_seeds; ++i) s.push_back(c.seed_for(i));
    return s;
}

void report(const std::string& label, const ren::ExperimentResult& r) {
    const auto& m = r.mean;
    std::cout << label << ": rounds=" << m.size();
    if (m.size() > 0)
        std::cout << " final_rolling_reward=" << ren::format_double(m.rolling_reward.back())
                  << " cumulative_regret=" << ren::format_double(m.cumulative_regret.back());
    std::cout << '\n';
    for (const auto& run : r.runs)
        if (run.error) std::cerr << "warning: seed " << run.seed << " stopped early: " << *run.error << '\n';
}

bool any_error(const std::vector<const ren::ExperimentResult*>& results) {
    for (const auto* r : results)
        for (const auto& run : r->runs)
            if (run.error) return true;
    return false;
}

// ---------------------------------------------------------------------------

int cmd_run(KeyValues kv, bool verbose) {
    const fs::path dir = take_out_dir(kv);
    const ren::ExperimentConfig cfg = ren::experiment_config_from(kv);
    Outputs out(dir, "run", ren::to_key_values(cfg));
    if (cfg.env == "replay") out.add_input("replay_log", cfg.replay_path);
    if (verbose) std::cerr << "run: " << ren::policy_name(cfg.policy) << " on " << cfg.env << '\n';
    const auto result = ren::run_experiment(cfg);
    ren::emit_csv(result, out.prepare("results.csv"));
    out.set_seeds(seed_list(cfg));
    out.finish();
    report(std::string(ren::policy_name(cfg.policy)), result);
    return any_error({&result}) ? 3 : 0;
}

int cmd_ablate(KeyValues kv, bool verbose) {
    const fs::path dir = take_out_dir(kv);
    ren::ExperimentConfig cfg = ren::experiment_config_from(kv);
    cfg.policy = ren::PolicyKind::ren;
    Outputs out(dir, "ablate", ren::to_key_values(cfg));
    if (cfg.env == "replay") out.add_input("replay_log", cfg.replay_path);
    if (verbose) std::cerr << "ablate: ren, ren-12, ren-13 on " << cfg.env << '\n';
    const auto a = ren::run_ablation(cfg);
    const std::vector<const ren::ExperimentResult*> all = {&a.full, &a.without_uncertainty, &a.without_diversity};
    ren::emit_csv(all, out.prepare("ablation.csv"));
    out.set_seeds(seed_list(cfg));
    out.finish();
    report("ren", a.full);
    report("ren-12", a.without_uncertainty);
    report("ren-13", a.without_diversity);
    return any_error(all) ? 3 : 0;
}

int cmd_sweep(KeyValues kv, bool verbose) {
    const fs::path dir = take_out_dir(kv);
    std::vector<std::string> errors;
    const auto grid = ren::get_double_list(kv, "lambda_grid", {0.001, 0.005, 0.01, 0.05, 0.1}, errors);
    throw_if(errors);
    if (grid.empty()) throw ren::InvalidArgument("sweep: lambda_grid is empty");
    for (const double l : grid)
        if (!(l >= 0.0)) throw ren::InvalidArgument("sweep: lambda_grid values must be >= 0");
    KeyValues base = kv;
    base.erase("lambda_grid");
    ren::ExperimentConfig cfg = ren::experiment_config_from(base);
    KeyValues recorded = ren::to_key_values(cfg);
    recorded.erase("lambda_d");
    std::string grid_text;
    for (const double l : grid) grid_text += (grid_text.empty() ? "" : ",") + ren::format_double(l);
    recorded["lambda_grid"] = grid_text;
    Outputs out(dir, "sweep", recorded);

    std::vector<ren::ExperimentResult> results;
    std::vector<std::string> labels;
    for (const double l : grid) {
        cfg.lambda_d = l;
        labels.push_back(std::string(ren::policy_name(cfg.policy)) + "@lambda_d=" + ren::format_double(l));
        if (verbose) std::cerr << "sweep: " << labels.back() << '\n';
        results.push_back(ren::run_experiment(cfg));
    }
    std::vector<const ren::ExperimentResult*> ptrs;
    for (const auto& r : results) ptrs.push_back(&r);
    ren::emit_csv(ptrs, out.prepare("sweep.csv"), labels);
    out.set_seeds(seed_list(cfg));
    out.finish();
    for (std::size_t i = 0; i < results.size(); ++i) report(labels[i], results[i]);
    return any_error(ptrs) ? 3 : 0;
}

int cmd_regret_bench(KeyValues kv, bool verbose) {
    const fs::path dir = take_out_dir(kv);
    std::vector<std::string> errors;
    ren::RegretBenchConfig c;
    c.dim = ren::get_size(kv, "dim", c.dim, errors);
    c.n_arms = ren::get_size(kv, "n_arms", c.n_arms, errors);
    c.t_grid = ren::get_size_list(kv, "t_grid", c.t_grid, errors);
    c.delta = ren::get_double(kv, "delta", c.delta, errors);
    c.noise_sigma = ren::get_double(kv, "noise_sigma", c.noise_sigma, errors);
    c.n_instances = ren::get_size(kv, "n_instances", c.n_instances, errors);
    c.seed = ren::get_size(kv, "seed", c.seed, errors);
    c.deceptive = ren::get_bool(kv, "deceptive", c.deceptive, errors);
    if (const auto it = kv.find("bandit_policy"); it != kv.end()) {
        if (it->second == "supren") c.policy = ren::BanditPolicy::supren;
        else if (it->second == "greedy") c.policy = ren::BanditPolicy::greedy;
        else errors.push_back("bandit_policy: expected supren or greedy, got '" + it->second + "'");
    }
    throw_if(errors);

    KeyValues recorded;
    recorded["dim"] = std::to_string(c.dim);
    recorded["n_arms"] = std::to_string(c.n_arms);
    std::string grid;
    for (const auto t : c.t_grid) grid += (grid.empty() ? "" : ",") + std::to_string(t);
    recorded["t_grid"] = grid;
    recorded["delta"] = ren::format_double(c.delta);
    recorded["noise_sigma"] = ren::format_double(c.noise_sigma);
    recorded["n_instances"] = std::to_string(c.n_instances);
    recorded["seed"] = std::to_string(c.seed);
    recorded["deceptive"] = c.deceptive ? "true" : "false";
    recorded["bandit_policy"] = c.policy == ren::BanditPolicy::supren ? "supren" : "greedy";
    Outputs out(dir, "regret-bench", recorded);

    if (verbose) std::cerr << "regret-bench: " << recorded["bandit_policy"] << " over T = " << grid << '\n';
    const auto r = ren::regret_bench(c);
    std::string csv = "t,instance,regret\n";
    for (std::size_t g = 0; g < r.t_grid.size(); ++g) {
        for (std::size_t i = 0; i < r.regret.size(); ++i)
            csv += std::to_string(r.t_grid[g]) + ',' + std::to_string(i) + ',' + ren::format_double(r.regret[i][g]) + '\n';
        csv += std::to_string(r.t_grid[g]) + ",mean," + ren::format_double(r.mean_regret[g]) + '\n';
    }
    std::ofstream(out.prepare("regret.csv"), std::ios::binary | std::ios::trunc) << csv;
    std::vector<std::uint64_t> seeds;
    for (std::size_t i = 0; i < c.n_instances; ++i) seeds.push_back(c.seed + i);
    out.set_seeds(seeds);
    out.finish();
    std::cout << "slope=" << ren::format_double(r.slope) << " monotone=" << (r.monotone ? "true" : "false") << '\n';
    return 0;
}

int cmd_bound_check(KeyValues kv, bool verbose) {
    const fs::path dir = take_out_dir(kv);
    std::vector<std::string> errors;
    ren::BoundCheckConfig c;
    c.dim = ren::get_size(kv, "dim", c.dim, errors);
    c.n_arms = ren::get_size(kv, "n_arms", c.n_arms, errors);
    c.horizon = ren::get_size(kv, "horizon", c.horizon, errors);
    c.delta = ren::get_double(kv, "delta", c.delta, errors);
    c.trials = ren::get_size(kv, "trials", c.trials, errors);
    c.seed = ren::get_size(kv, "seed", c.seed, errors);
    throw_if(errors);

    KeyValues recorded;
    recorded["dim"] = std::to_string(c.dim);
    recorded["n_arms"] = std::to_string(c.n_arms);
    recorded["horizon"] = std::to_string(c.horizon);
    recorded["delta"] = ren::format_double(c.delta);
    recorded["trials"] = std::to_string(c.trials);
    recorded["seed"] = std::to_string(c.seed);
    Outputs out(dir, "bound-check", recorded);

    if (verbose) std::cerr << "bound-check: " << c.trials << " trials\n";
    const auto r = ren::bound_check(c);
    nlohmann::ordered_json j;
    j["trials"] = r.trials;
    j["violations"] = r.violations;
    j["rate"] = r.rate;
    j["budget"] = r.budget;
    j["slack"] = r.slack;
    j["passed"] = r.passed;
    std::ofstream(out.prepare("bound_check.json"), std::ios::binary | std::ios::trunc) << j.dump(2) << '\n';
    out.set_seeds({c.seed});
    out.finish();
    std::cout << "violations=" << r.violations << '/' << r.trials << " rate=" << ren::format_double(r.rate)
              << " budget=" << ren::format_double(r.budget) << " slack=" << ren::format_double(r.slack) << ' '
              << (r.passed ? "PASS" : "FAIL") << '\n';
    return r.passed ? 0 : 1;
}

int cmd_gen_env(KeyValues kv, bool verbose) {
    const fs::path dir = take_out_dir(kv);
    std::vector<std::string> errors;
    const std::string name = kv.count("env") ? kv.at("env") : "syn-s";
    const std::uint64_t seed = ren::get_size(kv, "seed", 0, errors);
    throw_if(errors);
    ren::EnvironmentSpec spec = ren::EnvironmentSpec::named(name, seed);
    spec.slate_size = ren::get_size(kv, "slate_size", spec.slate_size, errors);
    spec.history_length = ren::get_size(kv, "history_length", spec.history_length, errors);
    throw_if(errors);

    KeyValues recorded;
    recorded["env"] = name;
    recorded["seed"] = std::to_string(seed);
    recorded["slate_size"] = std::to_string(spec.slate_size);
    recorded["history_length"] = std::to_string(spec.history_length);
    Outputs out(dir, "gen-env", recorded);

    if (verbose) std::cerr << "gen-env: " << name << " seed " << seed << '\n';
    const ren::SynEnv env = ren::generate_syn(spec);
    const auto as_list = [](const ren::Vec& v) { return std::vector<double>(v.data(), v.data() + v.size()); };
    nlohmann::ordered_json j;
    j["env"] = name;
    j["seed"] = seed;
    j["dim"] = spec.dim;
    j["n_items"] = env.n_items();
    j["n_users"] = env.n_users();
    j["items"] = nlohmann::json::array();
    for (ren::ItemId k = 0; k < env.n_items(); ++k) j["items"].push_back(as_list(env.item_latent(k)));
    j["users"] = nlohmann::json::array();
    for (std::size_t u = 0; u < env.n_users(); ++u) j["users"].push_back(as_list(env.user_latent(u)));
    j["histories"] = nlohmann::json::array();
    for (std::size_t u = 0; u < env.n_users(); ++u) j["histories"].push_back(env.history(u));
    std::ofstream(out.prepare("env.json"), std::ios::binary | std::ios::trunc) << j.dump(2) << '\n';
    out.set_seeds({seed});
    out.finish();
    std::cout << name << ": " << env.n_items() << " items, " << env.n_users() << " users\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Recommender exploration experiments"};
    app.require_subcommand(1);
    app.set_help_all_flag("--help-all", "expand all help");

    struct Sub {
        const char* name;
        const char* help;
        int (*fn)(KeyValues, bool);
    };
    const std::vector<Sub> subs = {
        {"gen-env", "generate a synthetic environment", cmd_gen_env},
        {"run", "run one policy over seeds", cmd_run},
        {"ablate", "full REN vs REN-1,2 vs REN-1,3", cmd_ablate},
        {"sweep", "REN over a lambda_d grid", cmd_sweep},
        {"regret-bench", "log-log regret slope of the linear bandit learner", cmd_regret_bench},
        {"bound-check", "Monte Carlo check of the confidence bound", cmd_bound_check},
    };
    std::vector<CommonOptions> opts(subs.size());
    std::vector<CLI::App*> apps;
    for (std::size_t i = 0; i < subs.size(); ++i) {
        auto* sub = app.add_subcommand(subs[i].name, subs[i].help);
        add_common(sub, opts[i]);
        apps.push_back(sub);
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    for (std::size_t i = 0; i < subs.size(); ++i) {
        if (!apps[i]->parsed()) continue;
        try {
            return subs[i].fn(resolve(subs[i].name, opts[i]), opts[i].verbose);
        } catch (const ren::Error& e) {
            std::cerr << "error: " << e.what() << '\n';
            return 2;
        } catch (const std::exception& e) {
            std::cerr << "error: " << e.what() << '\n';
            return 2;
        }
    }
    return 2;
}
