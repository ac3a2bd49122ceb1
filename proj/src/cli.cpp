#include "jointrec/cli.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <future>
#include <iostream>
#include <map>
#include <sstream>
#include <unordered_set>

#include <CLI11.hpp>
#include <json.hpp>

#include "jointrec/baselines.hpp"
#include "jointrec/data.hpp"
#include "jointrec/errors.hpp"
#include "jointrec/metrics.hpp"
#include "jointrec/model_io.hpp"

namespace jointrec::cli {

namespace {

std::string trim(const std::string& s) {
    const auto begin = s.find_first_not_of(" \t\r");
    if (begin == std::string::npos) return "";
    const auto end = s.find_last_not_of(" \t\r");
    return s.substr(begin, end - begin + 1);
}

double parse_double(const std::string& key, const std::string& value) {
    try {
        std::size_t used = 0;
        const double v = std::stod(value, &used);
        if (used != value.size()) throw std::invalid_argument("trailing characters");
        return v;
    } catch (const std::exception&) {
        throw ValidationError("config: key '" + key + "' has a non-numeric value '" + value +
                              "'");
    }
}

long parse_long(const std::string& key, const std::string& value) {
    const double v = parse_double(key, value);
    const long l = static_cast<long>(v);
    if (static_cast<double>(l) != v)
        throw ValidationError("config: key '" + key + "' must be an integer");
    return l;
}

}  // namespace

RunConfig load_run_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("config: cannot open '" + path + "'");

    std::map<std::string, std::string> kv;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string text = trim(line);
        if (text.empty() || text[0] == '#') continue;
        const auto eq = text.find('=');
        if (eq == std::string::npos)
            throw ValidationError("config: line " + std::to_string(line_no) +
                                  " is not key=value");
        const std::string key = trim(text.substr(0, eq));
        const std::string value = trim(text.substr(eq + 1));
        if (key.empty() || value.empty())
            throw ValidationError("config: line " + std::to_string(line_no) +
                                  " has an empty key or value");
        if (!kv.emplace(key, value).second)
            throw ValidationError("config: duplicate key '" + key + "'");
    }

    RunConfig cfg;
    auto take = [&](const std::string& key) {
        const auto it = kv.find(key);
        if (it == kv.end()) throw ValidationError("config: missing key '" + key + "'");
        const std::string value = it->second;
        kv.erase(it);
        return value;
    };

    cfg.train.learning_rate = parse_double("learning_rate", take("learning_rate"));
    cfg.train.max_epochs = static_cast<int>(parse_long("max_epochs", take("max_epochs")));
    cfg.train.rho = parse_double("rho", take("rho"));
    cfg.train.epsilon = parse_double("epsilon", take("epsilon"));
    cfg.train.ridge_lambda = parse_double("ridge_lambda", take("ridge_lambda"));
    cfg.train.dropout_rate = parse_double("dropout_rate", take("dropout_rate"));
    cfg.train.batch_size = static_cast<int>(parse_long("batch_size", take("batch_size")));
    cfg.train.patience = static_cast<int>(parse_long("patience", take("patience")));
    cfg.train.seed = static_cast<std::uint64_t>(parse_long("seed", take("seed")));
    cfg.hidden_dim = parse_long("hidden_dim", take("hidden_dim"));
    cfg.static_latent = parse_long("static_latent", take("static_latent"));
    cfg.rank = parse_long("rank", take("rank"));
    cfg.n_splits = static_cast<int>(parse_long("n_splits", take("n_splits")));
    cfg.top_n = static_cast<int>(parse_long("top_n", take("top_n")));

    if (!kv.empty()) throw ValidationError("config: unknown key '" + kv.begin()->first + "'");

    cfg.train.validate();
    if (cfg.hidden_dim < 1 || cfg.static_latent < 1 || cfg.rank < 1)
        throw ValidationError("config: model dims must be positive");
    if (cfg.n_splits < 1) throw ValidationError("config: n_splits must be positive");
    if (cfg.top_n < 1 || cfg.top_n > 9)
        throw ValidationError("config: top_n must lie between 1 and 9");
    return cfg;
}

namespace {

constexpr std::uint64_t kRandomBaselineOffset = 1000003;

std::vector<PatientRecord> load_corpus(const std::string& path) {
    std::vector<PatientRecord> corpus = load_jsonl(path);
    if (corpus.empty()) throw DataError("corpus '" + path + "' contains no patients");
    return corpus;
}

ModelDims dims_from(const RunConfig& cfg, const std::vector<PatientRecord>& corpus) {
    const CorpusShape shape = corpus_shape(corpus);
    if (shape.static_dim < 1 || shape.event_dim < 1)
        throw DataError("corpus has empty feature vectors");
    ModelDims dims;
    dims.event_dim = shape.event_dim;
    dims.static_dim = shape.static_dim;
    dims.hidden = cfg.hidden_dim;
    dims.static_latent = cfg.static_latent;
    dims.rank = cfg.rank;
    return dims;
}

std::vector<Instance> instances_for(const std::vector<PatientRecord>& corpus,
                                    const std::vector<std::string>& ids) {
    const std::unordered_set<std::string> wanted(ids.begin(), ids.end());
    std::vector<Instance> out;
    for (const auto& p : corpus) {
        if (!wanted.contains(p.id)) continue;
        auto per_patient = extract_instances(p);
        out.insert(out.end(), std::make_move_iterator(per_patient.begin()),
                   std::make_move_iterator(per_patient.end()));
    }
    return out;
}

std::vector<std::string> patient_ids(const std::vector<PatientRecord>& corpus) {
    std::vector<std::string> ids;
    ids.reserve(corpus.size());
    for (const auto& p : corpus) ids.push_back(p.id);
    return ids;
}

std::vector<std::pair<int, int>> decision_pairs(const std::vector<PatientRecord>& corpus) {
    std::vector<std::pair<int, int>> pairs;
    for (const auto& p : corpus)
        for (const auto& e : p.events)
            if (e.decision) pairs.push_back(*e.decision);
    return pairs;
}

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6f", v);
    return buf;
}

void print_score_grid(std::ostream& out, const Mat& scores) {
    char row[256];
    out << "scores:\n";
    std::snprintf(row, sizeof(row), "  %-12s %12s %13s %8s\n", "", kTypeNames[0], kTypeNames[1],
                  kTypeNames[2]);
    out << row;
    for (int j = 0; j < 3; ++j) {
        std::snprintf(row, sizeof(row), "  %-12s %12.6f %13.6f %8.6f\n", kIntentionNames[j],
                      scores(j, 0), scores(j, 1), scores(j, 2));
        out << row;
    }
}

// ---- gen-data --------------------------------------------------------------

int cmd_gen_data(int n_patients, double coupling, std::uint64_t seed, const std::string& out_path,
                 Index static_dim, Index event_dim, std::ostream& out) {
    const SyntheticShape shape{static_dim, event_dim};
    const auto corpus = generate_synthetic(n_patients, coupling, seed, shape);
    save_jsonl(corpus, out_path, shape.static_dim, shape.event_dim);

    const auto instances = extract_instances(corpus);
    ContingencyTable table = ContingencyTable::from_pairs(decision_pairs(corpus));
    out << "patients: " << corpus.size() << "\n";
    out << "instances: " << instances.size() << "\n";
    out << "decision histogram (intention x type):\n";
    for (int j = 0; j < 3; ++j) {
        out << "  " << kIntentionNames[j] << ":";
        for (int k = 0; k < 3; ++k) out << " " << table.counts(j, k);
        out << "\n";
    }
    out << "written: " << out_path << "\n";
    return 0;
}

// ---- stats -----------------------------------------------------------------

int cmd_stats(const std::string& data_path, std::ostream& out) {
    const auto corpus = load_corpus(data_path);
    const auto pairs = decision_pairs(corpus);
    if (pairs.empty()) throw DataError("corpus contains no decision events");

    const ContingencyTable table = ContingencyTable::from_pairs(pairs);
    const IndependenceTest chi = chi_squared_test(table);
    const IndependenceTest g = g_test(table);

    out << "decisions: " << pairs.size() << "\n";
    out << "contingency (intention x type):\n";
    for (int j = 0; j < 3; ++j) {
        out << "  " << kIntentionNames[j] << ":";
        for (int k = 0; k < 3; ++k) out << " " << table.counts(j, k);
        out << "\n";
    }
    char line[128];
    std::snprintf(line, sizeof(line), "chi2: %.6g\n", chi.stat);
    out << line;
    std::snprintf(line, sizeof(line), "g: %.6g\n", g.stat);
    out << line;
    out << "df: " << chi.df << "\n";
    std::snprintf(line, sizeof(line), "p_chi2: %.6g\n", chi.p);
    out << line;
    std::snprintf(line, sizeof(line), "p_g: %.6g\n", g.p);
    out << line;
    return 0;
}

// ---- train -----------------------------------------------------------------

nlohmann::json config_echo(const RunConfig& cfg) {
    return {{"learning_rate", cfg.train.learning_rate},
            {"max_epochs", cfg.train.max_epochs},
            {"rho", cfg.train.rho},
            {"epsilon", cfg.train.epsilon},
            {"ridge_lambda", cfg.train.ridge_lambda},
            {"dropout_rate", cfg.train.dropout_rate},
            {"batch_size", cfg.train.batch_size},
            {"patience", cfg.train.patience},
            {"seed", cfg.train.seed},
            {"hidden_dim", cfg.hidden_dim},
            {"static_latent", cfg.static_latent},
            {"rank", cfg.rank},
            {"n_splits", cfg.n_splits},
            {"top_n", cfg.top_n}};
}

int cmd_train(const std::string& data_path, const std::string& kind_name,
              const std::string& config_path, std::uint64_t split_seed,
              const std::string& out_path, std::ostream& out) {
    const RunConfig cfg = load_run_config(config_path);
    const ModelKind kind = model_kind_from_string(kind_name);
    const auto corpus = load_corpus(data_path);
    const ModelDims dims = dims_from(cfg, corpus);

    const SplitPlan plan = make_splits(patient_ids(corpus), 1, split_seed)[0];
    const auto train_set = instances_for(corpus, plan.train_ids);
    const auto val_set = instances_for(corpus, plan.val_ids);
    if (train_set.empty() || val_set.empty())
        throw DataError("train/validation partition has no decision instances");

    const TrainResult result = train(train_set, val_set, cfg.train, kind, dims);
    save_model(result.params, out_path);

    nlohmann::json manifest;
    manifest["model_kind"] = to_string(kind);
    manifest["config"] = config_echo(cfg);
    manifest["split_seed"] = split_seed;
    manifest["epochs_run"] = result.history.epochs.size();
    manifest["best_epoch"] = result.history.best_epoch;
    manifest["best_val_loss"] = result.history.best_val_loss;
    manifest["final_train_objective"] = result.history.epochs.back().train_objective;
    std::vector<double> val_history;
    for (const auto& e : result.history.epochs) val_history.push_back(e.val_loss);
    manifest["val_loss_history"] = val_history;
    const std::string manifest_path = out_path + ".manifest.json";
    std::ofstream mf(manifest_path);
    if (!mf) throw ValidationError("cannot open '" + manifest_path + "' for writing");
    mf << manifest.dump(2) << "\n";

    out << "model_kind: " << to_string(kind) << "\n";
    out << "train_instances: " << train_set.size() << "\n";
    out << "val_instances: " << val_set.size() << "\n";
    out << "epochs_run: " << result.history.epochs.size() << "\n";
    out << "best_epoch: " << result.history.best_epoch << "\n";
    out << "best_val_loss: " << fmt(result.history.best_val_loss) << "\n";
    out << "model: " << out_path << "\n";
    out << "manifest: " << manifest_path << "\n";
    return 0;
}

// ---- eval ------------------------------------------------------------------

struct SplitOutcome {
    // values[metric][model], indexed per kMetricNames / kModelNames
    std::array<std::array<double, 4>, 4> values{};
    std::string log;
};

SplitOutcome evaluate_split(const std::vector<PatientRecord>& corpus, const SplitPlan& plan,
                            const RunConfig& cfg, const ModelDims& dims) {
    const auto train_set = instances_for(corpus, plan.train_ids);
    const auto val_set = instances_for(corpus, plan.val_ids);
    const auto test_set = instances_for(corpus, plan.test_ids);
    if (train_set.empty() || val_set.empty() || test_set.empty())
        throw DataError("split " + std::to_string(plan.split_id) +
                        " has an empty partition of decision instances");

    TrainConfig split_cfg = cfg.train;
    split_cfg.seed = cfg.train.seed + static_cast<std::uint64_t>(plan.split_id);

    const TrainResult tensor = train(train_set, val_set, split_cfg, ModelKind::Tensor, dims);
    const TrainResult marginal = train(train_set, val_set, split_cfg, ModelKind::Marginal, dims);

    std::vector<JointTarget> fit_targets;
    for (const auto& inst : train_set) fit_targets.push_back(inst.target);
    for (const auto& inst : val_set) fit_targets.push_back(inst.target);
    const PopularityModel popularity = fit_most_popular(fit_targets);
    const Mat popular_scores = predict_most_popular(popularity);

    const auto random_scores = predict_random(
        split_cfg.seed + kRandomBaselineOffset, static_cast<int>(test_set.size()));

    std::array<std::vector<ScoredInstance>, 4> scored;  // per model
    for (std::size_t i = 0; i < test_set.size(); ++i) {
        const Instance& inst = test_set[i];
        const Mat truth = inst.target.matrix();

        scored[0].push_back(ScoredInstance::from_matrices(random_scores[i], truth));
        scored[1].push_back(ScoredInstance::from_matrices(popular_scores, truth));

        const Vec a_marginal =
            build_representation(inst.history, inst.static_features, marginal.params.lstm,
                                 marginal.params.stat)
                .values;
        const MarginalScores ms = score_marginal(a_marginal, marginal.params.marginal);
        scored[2].push_back(
            ScoredInstance::from_matrices(pseudo_joint(ms.p_y, ms.p_z), truth));

        const Vec a_tensor = build_representation(inst.history, inst.static_features,
                                                  tensor.params.lstm, tensor.params.stat)
                                 .values;
        scored[3].push_back(
            ScoredInstance::from_matrices(score_joint(a_tensor, tensor.params.tucker), truth));
    }

    SplitOutcome outcome;
    for (int model = 0; model < 4; ++model) {
        outcome.values[0][static_cast<std::size_t>(model)] =
            micro_auroc(scored[static_cast<std::size_t>(model)]);
        outcome.values[1][static_cast<std::size_t>(model)] =
            coverage_error(scored[static_cast<std::size_t>(model)]);
        outcome.values[2][static_cast<std::size_t>(model)] =
            rank_precision(scored[static_cast<std::size_t>(model)]);
        outcome.values[3][static_cast<std::size_t>(model)] =
            ndcg_at_k(scored[static_cast<std::size_t>(model)], 5);
    }

    std::ostringstream log;
    log << "split " << plan.split_id << ": test_instances=" << test_set.size()
        << " tensor_epochs=" << tensor.history.epochs.size()
        << " tensor_best_val=" << fmt(tensor.history.best_val_loss)
        << " marginal_epochs=" << marginal.history.epochs.size()
        << " marginal_best_val=" << fmt(marginal.history.best_val_loss) << "\n";
    outcome.log = log.str();
    return outcome;
}

}  // namespace

EvalOutcome evaluate_corpus(const std::vector<PatientRecord>& corpus, const RunConfig& cfg,
                            int n_splits) {
    const ModelDims dims = dims_from(cfg, corpus);
    const auto plans = make_splits(patient_ids(corpus), n_splits, cfg.train.seed);

    std::vector<std::future<SplitOutcome>> futures;
    futures.reserve(plans.size());
    for (const SplitPlan& plan : plans)
        futures.push_back(std::async(std::launch::async, [&corpus, plan, &cfg, &dims] {
            return evaluate_split(corpus, plan, cfg, dims);
        }));

    EvalOutcome outcome;
    for (auto& f : futures) {
        const SplitOutcome split = f.get();
        outcome.log += split.log;
        for (int metric = 0; metric < 4; ++metric)
            for (int model = 0; model < 4; ++model)
                outcome.report.add(metric, model,
                                   split.values[static_cast<std::size_t>(metric)]
                                               [static_cast<std::size_t>(model)]);
    }
    return outcome;
}

namespace {

int cmd_eval(const std::string& data_path, int n_splits_flag, const std::string& config_path,
             const std::string& out_path, std::ostream& out) {
    const RunConfig cfg = load_run_config(config_path);
    const int n_splits = n_splits_flag > 0 ? n_splits_flag : cfg.n_splits;
    const auto corpus = load_corpus(data_path);

    const EvalOutcome outcome = evaluate_corpus(corpus, cfg, n_splits);
    out << outcome.log;

    const std::string csv = outcome.report.to_csv();
    std::ofstream csv_out(out_path);
    if (!csv_out) throw ValidationError("cannot open '" + out_path + "' for writing");
    csv_out << csv;
    out << csv;
    out << "results: " << out_path << "\n";
    return 0;
}

// ---- predict ---------------------------------------------------------------

int cmd_predict(const std::string& model_path, const std::string& data_path,
                const std::string& patient_id, int t, int top_n, std::ostream& out) {
    if (top_n < 1 || top_n > 9) throw ValidationError("--top-n must lie between 1 and 9");
    const ModelParams model = load_model(model_path);
    const auto corpus = load_corpus(data_path);

    const auto patient = std::find_if(corpus.begin(), corpus.end(),
                                      [&](const PatientRecord& p) { return p.id == patient_id; });
    if (patient == corpus.end()) throw DataError("unknown patient '" + patient_id + "'");
    const auto event = std::find_if(patient->events.begin(), patient->events.end(),
                                    [&](const Event& e) { return e.t == t; });
    if (event == patient->events.end())
        throw DataError("patient '" + patient_id + "' has no event at t=" + std::to_string(t));

    std::vector<Vec> history;
    for (auto it = patient->events.begin(); it != event; ++it) history.push_back(it->features);

    const Vec a =
        build_representation(history, patient->static_features, model.lstm, model.stat).values;
    Mat scores;
    if (model.kind == ModelKind::Tensor) {
        scores = score_joint(a, model.tucker);
    } else {
        const MarginalScores ms = score_marginal(a, model.marginal);
        scores = pseudo_joint(ms.p_y, ms.p_z);
    }

    out << "patient: " << patient_id << "\n";
    out << "t: " << t << "\n";
    out << "model_kind: " << to_string(model.kind) << "\n";
    out << "history_events: " << history.size() << "\n";
    print_score_grid(out, scores);

    const auto ranked = top_n_pairs(scores, top_n);
    out << "top-" << top_n << ":\n";
    for (std::size_t i = 0; i < ranked.size(); ++i)
        out << "  " << (i + 1) << ". " << kIntentionNames[ranked[i].intention] << "/"
            << kTypeNames[ranked[i].type] << " " << fmt(ranked[i].score) << "\n";

    if (event->decision) {
        const auto [j, k] = *event->decision;
        out << "documented: " << kIntentionNames[j] << "/" << kTypeNames[k] << "\n";
        const bool covered = std::any_of(ranked.begin(), ranked.end(), [&](const RankedPair& r) {
            return r.intention == j && r.type == k;
        });
        out << "alert: " << (covered ? "false" : "true") << "\n";
    }
    return 0;
}

// ---- gradcheck ---------------------------------------------------------------

int cmd_gradcheck(std::uint64_t seed, bool self_test_corrupt, std::ostream& out) {
    const GradCheckReport report = grad_check(seed, self_test_corrupt);
    for (const auto& entry : report.entries) {
        char line[160];
        std::snprintf(line, sizeof(line), "config=%s max_rel_err=%.3e %s\n",
                      entry.config.c_str(), entry.max_rel_err, entry.pass ? "pass" : "FAIL");
        out << line;
    }
    return report.all_pass ? 0 : 1;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"joint radiotherapy decision model: sequence encoder + tensor decoder"};
    app.require_subcommand(1);

    // gen-data
    int patients = 0;
    double coupling = 0.0;
    std::uint64_t seed = 0;
    std::string out_path, data_path, config_path, kind_name, model_path, patient_id;
    Index static_dim = 114, event_dim = 182;

    auto* gen = app.add_subcommand("gen-data", "generate a synthetic correlated corpus");
    gen->add_option("--patients", patients, "number of patients")->required();
    gen->add_option("--coupling", coupling, "intention/type coupling in [0,1]")->required();
    gen->add_option("--seed", seed, "generator seed")->required();
    gen->add_option("--out", out_path, "output corpus path")->required();
    gen->add_option("--static-dim", static_dim, "static feature width");
    gen->add_option("--event-dim", event_dim, "event feature width");

    auto* stats = app.add_subcommand("stats", "contingency table and independence tests");
    stats->add_option("--data", data_path, "corpus path")->required();

    std::uint64_t split_seed = 0;
    auto* train_cmd = app.add_subcommand("train", "train one model on one split");
    train_cmd->add_option("--data", data_path, "corpus path")->required();
    train_cmd->add_option("--model-kind", kind_name, "tensor or marginal")->required();
    train_cmd->add_option("--config", config_path, "key=value config file")->required();
    train_cmd->add_option("--split-seed", split_seed, "seed of the patient split")->required();
    train_cmd->add_option("--out", out_path, "model output path")->required();

    int n_splits = 0;
    auto* eval_cmd = app.add_subcommand("eval", "cross-validated comparison of all models");
    eval_cmd->add_option("--data", data_path, "corpus path")->required();
    eval_cmd->add_option("--splits", n_splits, "number of splits (default from config)");
    eval_cmd->add_option("--config", config_path, "key=value config file")->required();
    eval_cmd->add_option("--out", out_path, "results CSV path")->required();

    int t_index = 0, top_n = 3;
    auto* predict = app.add_subcommand("predict", "score one decision point");
    predict->add_option("--model", model_path, "model file")->required();
    predict->add_option("--data", data_path, "corpus path")->required();
    predict->add_option("--patient", patient_id, "patient id")->required();
    predict->add_option("--t", t_index, "event time index")->required();
    predict->add_option("--top-n", top_n, "recommendation list length");

    bool self_test_corrupt = false;
    auto* gradcheck = app.add_subcommand("gradcheck", "finite-difference gradient verification");
    gradcheck->add_option("--seed", seed, "seed for parameters and batch");
    gradcheck->add_flag("--self-test-corrupt", self_test_corrupt,
                        "corrupt the analytic gradient; the check must then fail");

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp& e) {
        out << app.help();
        return 0;
    } catch (const CLI::ParseError& e) {
        err << "usage error: " << e.what() << "\n";
        return 2;
    }

    try {
        if (gen->parsed()) {
            if (patients < 1) throw ValidationError("--patients must be at least 1");
            return cmd_gen_data(patients, coupling, seed, out_path, static_dim, event_dim, out);
        }
        if (stats->parsed()) return cmd_stats(data_path, out);
        if (train_cmd->parsed())
            return cmd_train(data_path, kind_name, config_path, split_seed, out_path, out);
        if (eval_cmd->parsed()) return cmd_eval(data_path, n_splits, config_path, out_path, out);
        if (predict->parsed())
            return cmd_predict(model_path, data_path, patient_id, t_index, top_n, out);
        if (gradcheck->parsed()) return cmd_gradcheck(seed, self_test_corrupt, out);
        err << "no command given\n";
        return 2;
    } catch (const ValidationError& e) {
        err << "error: " << e.what() << "\n";
        return 2;
    } catch (const DataError& e) {
        err << "error: " << e.what() << "\n";
        return 3;
    } catch (const NumericError& e) {
        err << "error: " << e.what() << "\n";
        return 4;
    } catch (const ShapeError& e) {
        err << "error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        err << "internal error: " << e.what() << "\n";
        return 1;
    }
}

int run(const std::vector<std::string>& args) { return run(args, std::cout, std::cerr); }

}  // namespace jointrec::cli
