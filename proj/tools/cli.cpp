#include "cli.hpp"

#include <CLI11.hpp>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <sstream>
#include <string>

#include "rcmk/checkpoint.hpp"
#include "rcmk/config.hpp"
#include "rcmk/data.hpp"
#include "rcmk/error.hpp"
#include "rcmk/gradsuite.hpp"
#include "rcmk/model.hpp"
#include "rcmk/report.hpp"
#include "rcmk/robustness.hpp"
#include "rcmk/version.hpp"

namespace rcmk::cli {

namespace fs = std::filesystem;

namespace {

struct Opts {
    std::string config_path;
    std::vector<std::string> sets;
    std::string out_dir = "rcmk_out";
    std::int64_t seed = -1;  // -1 keeps the config's seeds
    int workers = 1;
    std::string checkpoint;
    std::string baseline;
    std::string seeds = "1,2,3";  // gradcheck
};

Config resolve_config(const Opts& o) {
    Config cfg = default_config();
    if (!o.config_path.empty()) {
        Config file = Config::load(o.config_path);
        for (const std::string& s : file.sections())
            for (const std::string& k : file.keys(s)) cfg.set(s, k, file.get(s, k));
    }
    if (o.seed >= 0) {
        cfg.set("train", "seed", std::to_string(o.seed));
        cfg.set("attack", "seed", std::to_string(o.seed));
        cfg.set("corruption", "seed", std::to_string(o.seed));
    }
    for (const std::string& s : o.sets) cfg.set_from_arg(s);
    return cfg;
}

// Every run records what actually executed: resolved config, seed, version.
void write_manifest(const Opts& o, const Config& cfg, const std::string& command) {
    Config m = cfg;
    m.set("run", "command", command);
    m.set("run", "version", std::string(kVersion));
    m.set("run", "seed", cfg.get_or("train", "seed", "0"));
    m.set("run", "workers", std::to_string(o.workers));
    write_text_file(fs::path(o.out_dir) / "manifest.txt", m.emit());
}

Dataset load_split(const Config& cfg, std::string_view split) {
    std::string kind = cfg.get_or("data", "dataset", "synth");
    std::int64_t limit = cfg.get_int_or("data", "limit", 0);
    if (kind == "synth") {
        std::int64_t n = limit > 0 ? limit : (split == "train" ? 10000 : 2000);
        return synth_digits(n, split == "train" ? 1 : 2);
    }
    if (kind != "mnist" && kind != "cifar10" && kind != "cifar100")
        throw ConfigError("data.dataset: unknown value '" + kind +
                          "' (expected synth, mnist, cifar10 or cifar100)");
    std::string dir = cfg.get_or("data", "dir", "");
    if (dir.empty())
        if (const char* env = std::getenv("RCMK_DATA_DIR")) dir = env;
    if (dir.empty())
        throw ConfigError("data.dir: empty and RCMK_DATA_DIR unset; required for dataset '" +
                          kind + "'");
    Dataset ds;
    if (kind == "mnist")
        ds = load_mnist(dir, split);
    else if (kind == "cifar10")
        ds = load_cifar(dir, 10, split);
    else
        ds = load_cifar(dir, 100, split);
    if (limit > 0) ds = subset(ds, limit, 9);
    return ds;
}

ModelSpec spec_for(const Config& cfg, const Dataset& sample) {
    ModelSpec spec = model_spec_from_config(cfg);
    spec.in_channels = sample.images.dim(1);
    spec.in_h = sample.images.dim(2);
    spec.in_w = sample.images.dim(3);
    spec.num_classes = sample.num_classes;
    return spec;
}

Model model_for(const Config& cfg, const Opts& o, const Dataset& sample, std::ostream& out) {
    if (!o.checkpoint.empty()) {
        Model m = load_checkpoint(o.checkpoint);
        out << "loaded checkpoint " << o.checkpoint << "\n";
        return m;
    }
    out << "no --checkpoint given; using a freshly initialized model\n";
    return build_model(spec_for(cfg, sample),
                       static_cast<std::uint64_t>(cfg.get_int_or("train", "seed", 0)));
}

Table metric_table() {
    Table t;
    t.header = {"method", "metric", "value"};
    return t;
}

void add_row(Table& t, std::string method, std::string metric, double value) {
    t.rows.push_back({std::move(method), std::move(metric), format_double(value, 10)});
}

void emit_metrics(const Table& t, const Opts& o, const std::string& file, std::ostream& out) {
    out << render_table(t);
    write_text_file(fs::path(o.out_dir) / file, to_csv(t));
    out << "wrote " << (fs::path(o.out_dir) / file).string() << "\n";
}

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> parts;
    std::string cur;
    std::stringstream ss(s);
    while (std::getline(ss, cur, ','))
        if (!cur.empty()) parts.push_back(cur);
    return parts;
}

std::string describe(const AttackSpec& a) {
    std::ostringstream os;
    os << attack_name(a.kind) << "(eps=" << format_double(a.epsilon, 6);
    if (a.kind == AttackKind::PGD)
        os << ",step=" << format_double(a.step_size, 6) << ",steps=" << a.num_steps
           << ",random_start=" << (a.random_start ? 1 : 0);
    if (a.kind == AttackKind::FFGSM)
        os << ",step=" << format_double(a.step_size > 0 ? a.step_size : ffgsm_default_step(a.epsilon), 6);
    os << ")";
    return os.str();
}

int cmd_train(const Opts& o, std::ostream& out) {
    Config cfg = resolve_config(o);
    fs::create_directories(o.out_dir);
    Dataset train = load_split(cfg, "train");
    Dataset test = load_split(cfg, "test");
    ModelSpec spec = spec_for(cfg, train);
    TrainConfig tc = train_config_from_config(cfg);
    Model m = build_model(spec, tc.seed);
    out << "training variant=" << variant_name(spec.variant) << " params=" << m.param_count()
        << " train_images=" << train.size() << " epochs=" << tc.epochs << "\n";

    AttackSpec attack;
    const AttackSpec* attack_ptr = nullptr;
    if (cfg.get_bool_or("train", "adversarial", false)) {
        attack = attack_spec_from_config(cfg);
        attack_ptr = &attack;
        out << "adversarial training with " << describe(attack) << "\n";
    }
    TrainReport rep = train_model(m, train, tc, attack_ptr);

    Table curve;
    curve.header = {"epoch", "step", "lr", "loss"};
    for (const TrainRecord& h : rep.history)
        curve.rows.push_back({std::to_string(h.epoch), std::to_string(h.step),
                              format_double(h.lr, 10), format_double(h.loss, 10)});
    write_text_file(fs::path(o.out_dir) / "loss_curve.csv", to_csv(curve));

    std::string ckpt = (fs::path(o.out_dir) / "checkpoint.rcmk").string();
    save_checkpoint(m, ckpt);
    out << "wrote " << ckpt << "\n";

    EvalReport ev = evaluate(m, test, cfg.get_int_or("eval", "batch_size", 256), o.workers);
    Table t = metric_table();
    std::string method(variant_name(spec.variant));
    add_row(t, method, "test_top1_accuracy_percent", accuracy_percent(ev));
    add_row(t, method, "test_mean_loss", ev.mean_loss);
    if (!rep.history.empty()) add_row(t, method, "final_train_loss", rep.history.back().loss);
    emit_metrics(t, o, "metrics.csv", out);
    write_manifest(o, cfg, "train");
    return 0;
}

int cmd_eval(const Opts& o, std::ostream& out) {
    Config cfg = resolve_config(o);
    fs::create_directories(o.out_dir);
    Dataset test = load_split(cfg, "test");
    Model m = model_for(cfg, o, test, out);
    EvalReport ev = evaluate(m, test, cfg.get_int_or("eval", "batch_size", 256), o.workers);
    Table t = metric_table();
    std::string method(variant_name(m.spec.variant));
    add_row(t, method, "top1_accuracy_percent", accuracy_percent(ev));
    add_row(t, method, "top1_error_percent", ev.top1_error_percent);
    if (ev.top5_error_percent) add_row(t, method, "top5_error_percent", *ev.top5_error_percent);
    add_row(t, method, "mean_loss", ev.mean_loss);
    emit_metrics(t, o, "metrics.csv", out);
    write_manifest(o, cfg, "eval");
    return 0;
}

int cmd_attack(const Opts& o, std::ostream& out) {
    Config cfg = resolve_config(o);
    fs::create_directories(o.out_dir);
    Dataset test = load_split(cfg, "test");
    Model m = model_for(cfg, o, test, out);
    std::int64_t bs = cfg.get_int_or("eval", "batch_size", 256);

    Table t = metric_table();
    EvalReport clean = evaluate(m, test, bs, o.workers);
    add_row(t, "clean", "accuracy_percent", accuracy_percent(clean));
    for (const std::string& kind : split_list(cfg.get_or("attack", "kind", "pgd"))) {
        Config one = cfg;
        one.set("attack", "kind", kind);
        AttackSpec spec = attack_spec_from_config(one);
        add_row(t, describe(spec), "robust_accuracy_percent",
                robust_accuracy(m, test, spec, bs, o.workers));
    }
    emit_metrics(t, o, "attacks.csv", out);
    write_manifest(o, cfg, "attack");
    return 0;
}

int cmd_corrupt(const Opts& o, std::ostream& out) {
    Config cfg = resolve_config(o);
    fs::create_directories(o.out_dir);
    Dataset test = load_split(cfg, "test");
    Model m = model_for(cfg, o, test, out);
    Model base = o.baseline.empty() ? m.clone() : load_checkpoint(o.baseline);
    if (o.baseline.empty())
        out << "no --baseline given; normalizing against the model itself (CE = 100)\n";

    std::vector<int> severities;
    for (std::int64_t s : cfg.get_int_list_or("corruption", "severities", {1, 2, 3, 4, 5}))
        severities.push_back(static_cast<int>(s));
    std::uint64_t seed = static_cast<std::uint64_t>(cfg.get_int_or("corruption", "seed", 0));

    CorruptionReport rep = corruption_error(m, base, test, all_corruptions(), severities, seed,
                                            o.workers);
    Table t = metric_table();
    for (const CorruptionCell& c : rep.cells)
        add_row(t, std::string(corruption_name(c.kind)) + "/" + std::to_string(c.severity),
                "top1_error_percent", c.model_error);
    for (const auto& [kind, ce] : rep.ce)
        add_row(t, std::string(corruption_name(kind)), "CE_percent", ce);
    for (CorruptionKind k : rep.undefined)
        t.rows.push_back({std::string(corruption_name(k)), "CE_percent", "undefined"});
    add_row(t, "all", "mCE_percent", rep.mce);
    emit_metrics(t, o, "corruption.csv", out);
    write_manifest(o, cfg, "corrupt");
    return 0;
}

int cmd_gradcheck(const Opts& o, std::ostream& out) {
    Config cfg = resolve_config(o);
    fs::create_directories(o.out_dir);
    std::vector<std::uint64_t> seeds;
    for (const std::string& s : split_list(o.seeds))
        seeds.push_back(static_cast<std::uint64_t>(std::stoull(s)));
    GradSuiteResult r = run_gradcheck_suite(seeds);
    out << format_gradsuite(r);

    Table t = metric_table();
    for (const GradSuiteCase& c : r.cases)
        add_row(t, c.name + "/seed" + std::to_string(c.seed),
                c.report.pass ? "max_rel_err" : "max_rel_err_FAIL", c.report.max_rel_err);
    write_text_file(fs::path(o.out_dir) / "gradcheck.csv", to_csv(t));
    write_manifest(o, cfg, "gradcheck");
    return r.all_passed() ? 0 : 1;
}

int cmd_inspect(const Opts& o, std::ostream& out) {
    Config cfg = resolve_config(o);
    fs::create_directories(o.out_dir);
    ModelSpec spec;
    Model m = [&] {
        if (!o.checkpoint.empty()) return load_checkpoint(o.checkpoint);
        // shape fields come straight from the config here; no dataset needed
        return build_model(model_spec_from_config(cfg),
                           static_cast<std::uint64_t>(cfg.get_int_or("train", "seed", 0)));
    }();
    spec = m.spec;

    out << "variant=" << variant_name(spec.variant) << " total_params=" << m.param_count()
        << "\n";
    Table t = metric_table();
    for (std::size_t si = 0; si < m.stages.size(); ++si) {
        for (std::size_t bi = 0; bi < m.stages[si].size(); ++bi) {
            RConvBlock& b = m.stages[si][bi].site;
            std::string name = "stage" + std::to_string(si) + ".unit" + std::to_string(bi);
            ParamCounts counts = count_params(b);
            std::ostringstream line;
            line << name << ": c_in=" << b.cfg.c_in << " c_out=" << b.cfg.c_out
                 << " stride=" << b.cfg.stride << " kernels=[";
            for (std::size_t j = 0; j < b.branch_kernels.size(); ++j)
                line << (j ? "," : "") << b.branch_kernels[j];
            line << "] split=[";
            for (std::size_t j = 0; j < b.split.size(); ++j)
                line << (j ? "," : "") << b.split[j];
            line << "] params=" << counts.total << " extra_vs_lst=" << counts.extra_vs_lst;
            out << line.str() << "\n";
            add_row(t, name, "params", static_cast<double>(counts.total));
            add_row(t, name, "extra_vs_lst", static_cast<double>(counts.extra_vs_lst));
        }
    }
    add_row(t, "model", "params", static_cast<double>(m.param_count()));
    emit_metrics(t, o, "inspect.csv", out);
    write_manifest(o, cfg, "inspect");
    return 0;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"rcmk: multi-kernel robust convolution toolkit"};
    app.require_subcommand(1);
    Opts o;
    int rc = 0;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", o.config_path, "INI config file");
        sub->add_option("--set", o.sets, "config override, section.key=value (repeatable)");
        sub->add_option("--out", o.out_dir, "output directory (default rcmk_out)");
        sub->add_option("--seed", o.seed, "master seed for train/attack/corruption sections");
        sub->add_option("--workers", o.workers, "worker threads for evaluation (default 1)");
        return sub;
    };
    auto add_checkpoint = [&](CLI::App* sub) {
        sub->add_option("--checkpoint", o.checkpoint, "model checkpoint to load");
        return sub;
    };

    CLI::App* train = add_common(app.add_subcommand(
        "train", "train a model; writes checkpoint.rcmk, loss_curve.csv, metrics.csv"));
    train->callback([&] { rc = cmd_train(o, out); });

    CLI::App* eval_cmd = add_checkpoint(
        add_common(app.add_subcommand("eval", "evaluate on the test split; writes metrics.csv")));
    eval_cmd->callback([&] { rc = cmd_eval(o, out); });

    CLI::App* attack = add_checkpoint(add_common(app.add_subcommand(
        "attack", "robust accuracy under the configured attacks; writes attacks.csv")));
    attack->callback([&] { rc = cmd_attack(o, out); });

    CLI::App* corrupt_cmd = add_checkpoint(add_common(app.add_subcommand(
        "corrupt", "corruption error / mCE against a baseline; writes corruption.csv")));
    corrupt_cmd->add_option("--baseline", o.baseline, "baseline checkpoint for CE normalization");
    corrupt_cmd->callback([&] { rc = cmd_corrupt(o, out); });

    CLI::App* gradcheck = add_common(app.add_subcommand(
        "gradcheck", "finite-difference checks for every layer; writes gradcheck.csv"));
    gradcheck->add_option("--seeds", o.seeds, "comma-separated seed list (default 1,2,3)");
    gradcheck->callback([&] { rc = cmd_gradcheck(o, out); });

    CLI::App* inspect = add_checkpoint(add_common(app.add_subcommand(
        "inspect", "parameter counts and channel partitions per block; writes inspect.csv")));
    inspect->callback([&] { rc = cmd_inspect(o, out); });

    std::vector<const char*> argv;
    argv.reserve(args.size());
    for (const std::string& a : args) argv.push_back(a.c_str());

    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return 0;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return 0;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n";
        return 2;
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    }
    return rc;
}

int run_main(int argc, char** argv) {
    std::vector<std::string> args(argv, argv + argc);
    return run(args, std::cout, std::cerr);
}

}  // namespace rcmk::cli
