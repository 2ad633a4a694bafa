#include "bbdm/cli.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>

#include "bbdm/checkpoint.hpp"
#include "bbdm/config.hpp"
#include "bbdm/csv.hpp"
#include "bbdm/metrics.hpp"
#include "bbdm/sampler.hpp"
#include "bbdm/verify.hpp"

namespace fs = std::filesystem;

namespace bbdm {

namespace {

struct CommonArgs {
    std::string config_path;
    std::vector<std::string> overrides;
    std::string out;
};

struct SampleArgs {
    std::string checkpoint;
    std::optional<std::int64_t> n;
    std::optional<int> steps;
    std::optional<double> eta;
    std::optional<std::uint64_t> seed;
    std::optional<int> k;
    bool ancestral = false;
    bool trajectories = false;
    bool raw_params = false;
};

struct EvalArgs {
    std::vector<std::string> samples;
    std::string reference;
    std::string report;
    int k = 5;
    std::string sd = "population";
    std::optional<double> max_energy;
};

struct InfoArgs {
    std::optional<int> num_steps;
    std::optional<double> scale;
    int every = 1;
};

void add_common(CLI::App* cmd, CommonArgs& args, bool with_out) {
    cmd->add_option("-c,--config", args.config_path, "config file (key = value lines)");
    cmd->add_option("--set", args.overrides, "override a config key: key=value (repeatable)");
    if (with_out) cmd->add_option("-o,--out", args.out, "output directory (overrides output_dir)");
}

Config load_config(const CommonArgs& args) {
    Config c;
    if (!args.config_path.empty()) {
        if (!fs::exists(args.config_path)) throw ConfigError("config file '" + args.config_path + "' does not exist");
        c.load_file(args.config_path);
    }
    for (const auto& o : args.overrides) c.set(o);
    if (!args.out.empty()) c.set("output_dir", args.out);
    return c;
}

void require_file(const std::string& path, const std::string& what) {
    if (!fs::is_regular_file(path)) throw ConfigError(what + " '" + path + "' does not exist");
}

// Marks an output directory as partial until commit() is called.
class IncompleteMarker {
public:
    explicit IncompleteMarker(const fs::path& dir) : path_(dir / ".incomplete") {
        fs::create_directories(dir);
        std::ofstream(path_) << "partial output\n";
    }
    void commit() { fs::remove(path_); }

private:
    fs::path path_;
};

void write_resolved_config(const fs::path& path, const Config& c) {
    std::ofstream out(path);
    for (const auto& [key, value] : c.entries()) out << key << " = " << value << '\n';
    if (!out) throw std::runtime_error("cannot write " + path.string());
}

GaussianParams flipped_reverse_mean(const BridgeSchedule& sch, const StateVector& x_t, const StateVector& y,
                                    const StateVector& eps, int t) {
    auto p = reverse_mean(sch, x_t, y, eps, t);
    p.mean += 2.0 * sch.c_eps(t) * eps;
    return p;
}

int cmd_verify(const CommonArgs& args, const std::string& fault, std::ostream& out) {
    const Config c = load_config(args);
    VerifyOptions options;
    if (c.is_set("seed")) options.seed = c.get_u64("seed");
    if (fault == "sign-flip") {
        options.reverse_mean = flipped_reverse_mean;
    } else if (!fault.empty()) {
        throw ConfigError("unknown fault '" + fault + "'");
    }
    const auto report = run_verification(options);
    print_verify_report(out, report);
    return report.all_pass() ? kExitOk : kExitFailure;
}

int cmd_train(const CommonArgs& args, const std::string& resume, std::ostream& out) {
    const Config c = load_config(args);
    const PairedDataset data = dataset_from_config(c);
    const TrainConfig cfg = to_train_config(c);
    const fs::path dir = c.require("output_dir");
    std::optional<Checkpoint> from;
    if (!resume.empty()) {
        require_file(resume, "checkpoint file");
        try {
            from = load_checkpoint(resume);
        } catch (const std::runtime_error& e) {
            throw ConfigError(resume + ": " + e.what());
        }
    }
    IncompleteMarker marker(dir);
    write_resolved_config(dir / "config.resolved", c);
    const auto result = run_training(cfg, data, dir, from);
    marker.commit();
    out << "trained " << result.final_state.step << " steps; checkpoint " << result.checkpoint_path.string()
        << "; metrics " << result.metrics_path.string() << '\n';
    if (!result.losses.empty()) out << "final loss " << format_double(result.losses.back()) << '\n';
    return kExitOk;
}

void write_samples_csv(const fs::path& path, const Config& c, const SamplerPlan& plan, Eigen::Index first,
                       Eigen::Index k, const Eigen::MatrixXd& x0) {
    std::ofstream out(path, std::ios::binary);
    out << "#format=bbdm-samples\n";
    out << "#seed=" << plan.seed << '\n';
    out << "#T=" << c.get("T") << "\n#s=" << c.get("s") << '\n';
    out << "#sampler=" << (plan.mode == SamplerMode::kAncestral ? "ancestral" : "accelerated") << '\n';
    if (plan.mode == SamplerMode::kAccelerated) {
        out << "#sample_steps=" << plan.grid.size() << "\n#eta=" << format_double(plan.eta) << '\n';
    }
    out << "cond,sample";
    for (const auto& name : indexed_columns("x_", x0.cols())) out << ',' << name;
    out << '\n';
    for (Eigen::Index i = 0; i < x0.rows(); ++i) {
        out << first + i / k << ',' << i % k;
        for (Eigen::Index j = 0; j < x0.cols(); ++j) out << ',' << format_double(x0(i, j));
        out << '\n';
    }
    if (!out) throw std::runtime_error("cannot write " + path.string());
}

int cmd_sample(const CommonArgs& args, const SampleArgs& s, std::ostream& out) {
    Config c = load_config(args);
    if (s.n) c.set("n_samples", std::to_string(*s.n));
    if (s.steps) c.set("sample_steps", std::to_string(*s.steps));
    if (s.eta) c.set("eta", format_double(*s.eta));
    if (s.seed) c.set("seed", std::to_string(*s.seed));
    if (s.k) c.set("k", std::to_string(*s.k));
    if (s.ancestral) c.set("sampler", "ancestral");
    if (s.trajectories) c.set("trajectories", "true");
    if (s.raw_params) c.set("use_ema", "false");

    require_file(s.checkpoint, "checkpoint file");
    Checkpoint ckpt;
    try {
        ckpt = load_checkpoint(s.checkpoint);
    } catch (const std::runtime_error& e) {
        throw ConfigError(s.checkpoint + ": " + e.what());
    }
    const int T = static_cast<int>(c.get_int("T"));
    const double scale = c.get_double("s");
    if (T != ckpt.num_steps || scale != ckpt.scale) {
        throw ConfigError("checkpoint was trained with T = " + std::to_string(ckpt.num_steps) +
                          ", s = " + format_double(ckpt.scale) + " but the config has T = " + std::to_string(T) +
                          ", s = " + format_double(scale));
    }
    const PairedDataset data = dataset_from_config(c);
    if (data.dim() != ckpt.mlp.data_dim) {
        throw ConfigError("dataset dim " + std::to_string(data.dim()) + " does not match checkpoint dim " +
                          std::to_string(ckpt.mlp.data_dim));
    }
    const std::int64_t n = c.get_int("n_samples");
    const std::int64_t k = c.get_int("k");
    if (n < 0 || n > data.size()) {
        throw ConfigError("key 'n_samples': must lie in [0, " + std::to_string(data.size()) + "]");
    }
    if (k < 1) throw ConfigError("key 'k': must be >= 1");

    SamplerPlan plan;
    plan.seed = c.get_u64("seed");
    plan.record_trajectory = c.get_bool("trajectories");
    const std::string mode = c.get("sampler");
    if (mode == "ancestral") {
        plan.mode = SamplerMode::kAncestral;
    } else if (mode == "accelerated") {
        const auto steps = c.get_int("sample_steps");
        if (steps < 1 || steps > T) throw ConfigError("key 'sample_steps': must lie in [1, T = " + std::to_string(T) + "]");
        plan.grid = make_grid(T, static_cast<int>(steps));
        plan.eta = c.get_double("eta");
    } else {
        throw ConfigError("key 'sampler': expected 'ancestral' or 'accelerated', got '" + mode + "'");
    }
    try {
        plan.validate(T);
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }

    const fs::path dir = c.require("output_dir");
    IncompleteMarker marker(dir);
    const BridgeSchedule schedule(T, scale);
    const NoisePredictor model(ckpt.mlp, c.get_bool("use_ema") ? ckpt.inference_params() : ckpt.params);
    const Eigen::Index first = data.size() - n;
    Eigen::MatrixXd y(n * k, data.dim());
    for (Eigen::Index i = 0; i < y.rows(); ++i) y.row(i) = data.y.row(first + i / k);
    const auto batch = run_sampler(schedule, model, y, plan);

    write_samples_csv(dir / "samples.csv", c, plan, first, k, batch.x0);
    if (plan.record_trajectory) {
        fs::create_directories(dir / "trajectories");
        for (std::size_t i = 0; i < batch.trajectories.size(); ++i) {
            const auto row = static_cast<Eigen::Index>(i);
            const std::string name =
                "cond" + std::to_string(first + row / k) + "_sample" + std::to_string(row % k) + ".csv";
            write_trajectory_csv(dir / "trajectories" / name, batch.trajectories[i]);
        }
    }
    marker.commit();
    out << "wrote " << batch.x0.rows() << " samples to " << (dir / "samples.csv").string() << '\n';
    return kExitOk;
}

struct SampleFile {
    std::vector<std::int64_t> cond;
    Eigen::MatrixXd x;
    std::optional<std::uint64_t> seed;
};

std::string first_line(const fs::path& path) {
    std::ifstream in(path);
    std::string line;
    std::getline(in, line);
    return line;
}

SampleFile read_sample_file(const std::string& path) {
    require_file(path, "samples file");
    NumericTable table;
    try {
        table = read_numeric_csv(path);
    } catch (const std::exception& e) {
        throw ConfigError(path + ": " + e.what());
    }
    if (table.columns.size() < 3 || table.columns[0] != "cond" || table.columns[1] != "sample") {
        throw ConfigError(path + ": expected columns cond,sample,x_0,...");
    }
    SampleFile f;
    const Eigen::Index dim = static_cast<Eigen::Index>(table.columns.size()) - 2;
    f.x = table.values.rightCols(dim);
    for (Eigen::Index i = 0; i < table.values.rows(); ++i) f.cond.push_back(static_cast<std::int64_t>(table.values(i, 0)));
    std::ifstream in(path);
    std::string line;
    while (std::getline(in, line) && !line.empty() && line[0] == '#') {
        if (line.rfind("#seed=", 0) == 0) f.seed = std::stoull(line.substr(6));
    }
    return f;
}

int cmd_eval(const EvalArgs& a, std::ostream& out) {
    if (a.samples.empty()) throw ConfigError("eval needs at least one --samples file");
    std::vector<SampleFile> files;
    for (const auto& p : a.samples) files.push_back(read_sample_file(p));
    const Eigen::Index dim = files.front().x.cols();
    for (std::size_t i = 0; i < files.size(); ++i) {
        if (files[i].x.cols() != dim) {
            throw ConfigError("dim mismatch: " + a.samples[i] + " has dim " + std::to_string(files[i].x.cols()) +
                              ", expected " + std::to_string(dim));
        }
    }
    SdForm form = SdForm::kPopulation;
    if (a.sd == "sample") {
        form = SdForm::kSample;
    } else if (a.sd != "population") {
        throw ConfigError("--sd must be 'population' or 'sample'");
    }

    // One sample set per (file, conditioning input), in file order.
    std::vector<Eigen::MatrixXd> sets;
    Eigen::Index total = 0;
    std::set<std::int64_t> conds;
    for (const auto& f : files) {
        std::map<std::int64_t, std::vector<Eigen::Index>> groups;
        for (Eigen::Index i = 0; i < f.x.rows(); ++i) groups[f.cond[static_cast<std::size_t>(i)]].push_back(i);
        for (const auto& [cond, rows] : groups) {
            Eigen::MatrixXd s(static_cast<Eigen::Index>(rows.size()), dim);
            for (std::size_t j = 0; j < rows.size(); ++j) s.row(static_cast<Eigen::Index>(j)) = f.x.row(rows[j]);
            sets.push_back(std::move(s));
            conds.insert(cond);
        }
        total += f.x.rows();
    }
    Eigen::MatrixXd all(total, dim);
    Eigen::Index at = 0;
    for (const auto& f : files) {
        all.middleRows(at, f.x.rows()) = f.x;
        at += f.x.rows();
    }
    if (total == 0) throw ConfigError("samples files contain no rows");

    require_file(a.reference, "reference file");
    Eigen::MatrixXd reference;
    if (first_line(a.reference) == "#format=bbdm-paired") {
        PairedDataset ref;
        try {
            ref = load_dataset(a.reference);
        } catch (const std::runtime_error& e) {
            throw ConfigError(e.what());
        }
        if (ref.dim() != dim) {
            throw ConfigError("dim mismatch: reference " + a.reference + " has dim " + std::to_string(ref.dim()) +
                              ", samples have dim " + std::to_string(dim));
        }
        // The paired targets of the conditioning inputs that were sampled.
        reference.resize(static_cast<Eigen::Index>(conds.size()), dim);
        Eigen::Index r = 0;
        for (auto cond : conds) {
            if (cond < 0 || cond >= ref.size()) {
                throw ConfigError("cond " + std::to_string(cond) + " is not a row of " + a.reference);
            }
            reference.row(r++) = ref.x0.row(cond);
        }
    } else {
        const auto ref = read_sample_file(a.reference);
        if (ref.x.cols() != dim) {
            throw ConfigError("dim mismatch: reference " + a.reference + " has dim " + std::to_string(ref.x.cols()) +
                              ", samples have dim " + std::to_string(dim));
        }
        reference = ref.x;
    }
    if (reference.rows() == 0) throw ConfigError("reference " + a.reference + " contains no rows");

    double div = 0.0;
    try {
        div = diversity(sets, a.k, form);
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string(e.what()) + " (pass --k to match the sample files)");
    }
    const double energy = energy_distance(all, reference);
    const Moments mom = moments(all);

    const std::uint64_t seed = files.front().seed.value_or(0);
    std::vector<MetricRow> rows;
    rows.push_back({"diversity", div, static_cast<std::int64_t>(sets.size()), seed});
    rows.push_back({"energy_distance", energy, total, seed});
    for (Eigen::Index j = 0; j < dim; ++j) rows.push_back({"mean_" + std::to_string(j), mom.mean[j], total, seed});
    for (Eigen::Index j = 0; j < dim; ++j) rows.push_back({"var_" + std::to_string(j), mom.var[j], total, seed});
    rows.push_back({"var_defined", mom.var_defined ? 1.0 : 0.0, total, seed});

    if (!a.report.empty()) {
        const fs::path report = a.report;
        if (report.has_parent_path()) fs::create_directories(report.parent_path());
        write_report_csv(report, rows);
    }
    out << "metric,value,n,seed\n";
    for (const auto& r : rows) out << r.metric << ',' << format_double(r.value) << ',' << r.n << ',' << r.seed << '\n';
    if (a.max_energy && !(energy <= *a.max_energy)) {
        out << "energy distance " << format_double(energy) << " exceeds " << format_double(*a.max_energy) << '\n';
        return kExitFailure;
    }
    return kExitOk;
}

int cmd_info(const CommonArgs& args, const InfoArgs& a, std::ostream& out) {
    Config c = load_config(args);
    if (a.num_steps) c.set("T", std::to_string(*a.num_steps));
    if (a.scale) c.set("s", format_double(*a.scale));
    if (a.every < 1) throw ConfigError("--every must be >= 1");
    BridgeSchedule sch = [&] {
        try {
            return BridgeSchedule(static_cast<int>(c.get_int("T")), c.get_double("s"));
        } catch (const std::invalid_argument& e) {
            throw ConfigError(e.what());
        }
    }();
    const int T = sch.num_steps();
    out << "t,m,delta,delta_cond,posterior_var,c_x,c_y,c_eps\n";
    for (int t = 0; t <= T; ++t) {
        if (t % a.every != 0 && t != T) continue;
        const auto e = sch.query(t);
        out << t << ',' << format_double(e.m) << ',' << format_double(e.delta) << ',';
        if (e.delta_cond) out << format_double(*e.delta_cond);
        if (e.reverse) {
            out << ',' << format_double(e.reverse->posterior_var) << ',' << format_double(e.reverse->c_x) << ','
                << format_double(e.reverse->c_y) << ',' << format_double(e.reverse->c_eps) << '\n';
        } else {
            out << ",,,,\n";
        }
    }
    return kExitOk;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Brownian bridge diffusion: verification, training, sampling and evaluation"};
    app.name("bbdm");
    app.require_subcommand(1, 1);

    CommonArgs verify_args, train_args, sample_args, info_args;
    std::string fault, resume;
    SampleArgs sample;
    EvalArgs eval;
    InfoArgs info;

    auto* verify = app.add_subcommand("verify", "run the invariant suites and print a pass/fail table");
    add_common(verify, verify_args, false);
    verify->add_option("--inject-fault", fault, "deliberately break a component (sign-flip)")->group("");

    auto* train = app.add_subcommand("train", "train a noise predictor");
    add_common(train, train_args, true);
    train->add_option("--resume", resume, "continue from a checkpoint file");

    auto* sample_cmd = app.add_subcommand("sample", "draw samples from a trained checkpoint");
    add_common(sample_cmd, sample_args, true);
    sample_cmd->add_option("--checkpoint", sample.checkpoint, "checkpoint file")->required();
    sample_cmd->add_option("-n,--n", sample.n, "number of conditioning inputs (last rows of the dataset)");
    sample_cmd->add_option("-S,--steps", sample.steps, "sampling steps of the accelerated sampler");
    sample_cmd->add_option("--eta", sample.eta, "noise scale in [0, 1]");
    sample_cmd->add_option("--seed", sample.seed, "sampling seed");
    sample_cmd->add_option("-k,--k", sample.k, "samples per conditioning input");
    sample_cmd->add_flag("--ancestral", sample.ancestral, "use the full-length ancestral sampler");
    sample_cmd->add_flag("--trajectories", sample.trajectories, "write one trajectory CSV per sample");
    sample_cmd->add_flag("--raw-params", sample.raw_params, "use raw parameters instead of the EMA copy");

    auto* eval_cmd = app.add_subcommand("eval", "diversity, energy distance and moments of sample files");
    eval_cmd->add_option("--samples", eval.samples, "samples CSV (repeatable)")->required();
    eval_cmd->add_option("--reference", eval.reference, "dataset file or samples CSV")->required();
    eval_cmd->add_option("-k,--k", eval.k, "samples per conditioning input");
    eval_cmd->add_option("--sd", eval.sd, "standard deviation form: population or sample");
    eval_cmd->add_option("-o,--out", eval.report, "report CSV path");
    eval_cmd->add_option("--max-energy", eval.max_energy, "fail (exit 1) above this energy distance");

    auto* info_cmd = app.add_subcommand("info", "print the schedule table");
    add_common(info_cmd, info_args, false);
    info_cmd->add_option("-T,--T", info.num_steps, "number of steps");
    info_cmd->add_option("-s,--s", info.scale, "variance scale");
    info_cmd->add_option("--every", info.every, "print every n-th row");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (*verify) return cmd_verify(verify_args, fault, out);
        if (*train) return cmd_train(train_args, resume, out);
        if (*sample_cmd) return cmd_sample(sample_args, sample, out);
        if (*eval_cmd) return cmd_eval(eval, out);
        if (*info_cmd) return cmd_info(info_args, info, out);
    } catch (const ConfigError& e) {
        err << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const std::invalid_argument& e) {
        err << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const TrainingDiverged& e) {
        err << "training diverged at step " << e.step() << ": " << e.what() << '\n';
        return kExitFailure;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kExitFailure;
    }
    return kExitUsage;
}

}  // namespace bbdm
