// deepglstm: featurize molecules, train and evaluate the affinity model,
// predict single pairs, rank drugs by combined score, run the gradient check.
//
// Errors go to stderr as one JSON object {"error": ..., "message": ...} and
// the process exits nonzero (2 for usage errors, 1 otherwise).

#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "deepglstm/deepglstm.hpp"

namespace fs = std::filesystem;
using namespace deepglstm;
using nlohmann::json;

namespace {

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

void write_json(const fs::path& path, const json& j) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << j.dump(2) << '\n';
}

template <class T>
void write_matrix_csv(std::ostream& out, const Tensor<T>& m) {
    out.precision(17);
    for (std::size_t i = 0; i < m.rows(); ++i) {
        for (std::size_t j = 0; j < m.cols(); ++j) {
            if (j) out << ',';
            if constexpr (sizeof(T) == 1) out << static_cast<int>(m(i, j));
            else out << m(i, j);
        }
        out << '\n';
    }
}

struct ModelFlags {
    std::string blocks = "1,2,3";
    std::string power_mode = "binarized";
    std::string encoder = "bilstm";
    std::size_t max_len = kDefaultSequenceLength;
    double dropout = 0.2;

    void add(CLI::App* app) {
        app->add_option("--blocks", blocks, "GCN blocks to use, subset of 1,2,3")->capture_default_str();
        app->add_option("--power-mode", power_mode, "A^2/A^3 construction: binarized|raw")->capture_default_str();
        app->add_option("--encoder", encoder, "protein encoder: bilstm|none")->capture_default_str();
        app->add_option("--max-len", max_len, "protein token length")->capture_default_str();
        app->add_option("--dropout", dropout, "dropout probability")->capture_default_str();
    }

    ModelConfig config() const {
        ModelConfig c;
        c.blocks = BlockMask::parse(blocks);
        c.power_mode = parse_power_mode(power_mode);
        c.encoder = parse_encoder(encoder);
        c.max_len = max_len;
        c.dropout = dropout;
        return c;
    }
};

struct DataFlags {
    std::string data_dir;
    std::string measure = "pKd";
    std::uint64_t seed = 0;
    double test_fraction = 1.0 / 6.0;
    std::string report;

    void add(CLI::App* app, bool dir_required) {
        auto* o = app->add_option("--data-dir", data_dir, "directory with drugs.csv, proteins.csv, affinities.csv");
        if (dir_required) o->required();
        app->add_option("--measure", measure, "pKd|KIBA|pKi|AC50|STITCH_SCORES")->capture_default_str();
        app->add_option("--seed", seed, "seed for initialization, split, batch order and dropout")->capture_default_str();
        app->add_option("--test-fraction", test_fraction, "fraction of records held out")->capture_default_str();
        app->add_option("--report", report, "write dataset load warnings as JSON");
    }

    AffinityDataset load() const {
        LoadReport rep;
        auto ds = load_dataset(data_dir, parse_measure(measure), &rep);
        if (!report.empty()) write_json(report, rep.to_json());
        if (rep.dropped_smiles)
            std::cerr << "warning: dropped " << rep.dropped_smiles << " drugs with unparseable SMILES ("
                      << rep.dropped_records << " affinity rows)\n";
        return ds;
    }
};

int cmd_featurize(const std::string& smiles, const std::string& out_path, const std::string& dump_norm,
                  const std::string& power_mode) {
    const auto graph = chem::parse_smiles(smiles);
    const auto [x, adj] = chem::featurize(graph);
    if (out_path.empty()) {
        write_matrix_csv(std::cout, x);
    } else {
        std::ofstream out(out_path);
        if (!out) throw std::runtime_error("cannot write " + out_path);
        write_matrix_csv(out, x);
    }
    if (!dump_norm.empty()) {
        const auto in = graph_inputs_from<double>(x, adj, parse_power_mode(power_mode));
        for (const auto& a : in.adjacency) {
            const fs::path p = dump_norm + "_A" + std::to_string(a.power) + ".csv";
            std::ofstream out(p);
            if (!out) throw std::runtime_error("cannot write " + p.string());
            write_matrix_csv(out, a.values);
        }
    }
    return 0;
}

int cmd_gradcheck(std::uint64_t seed, std::size_t coordinates, double eps) {
    ad::GradCheckOptions opt;
    opt.max_coordinates = coordinates;
    opt.eps = eps;
    const auto r = model_gradcheck(seed, opt);
    const bool ok = r.result.max_relative_error < 1e-4 && r.result.checked > 0;
    std::cout << json{{"max_relative_error", r.result.max_relative_error},
                      {"checked", r.result.checked},
                      {"skipped_kinks", r.result.skipped_kinks},
                      {"parameters", r.parameters},
                      {"pass", ok}}
                     .dump()
              << '\n';
    return ok ? 0 : 1;
}

void write_eval_outputs(const Evaluation& ev, const std::string& metrics_out, const std::string& scatter_out) {
    if (!metrics_out.empty()) write_json(metrics_out, ev.report.to_json());
    if (!scatter_out.empty()) write_scatter_csv(scatter_out, ev.scatter);
}

/// Scores every drug of `drugs` against every protein in `proteins` with both models.
std::vector<PairPrediction> screen(const Checkpoint& kiba, const Checkpoint& davis,
                                   const std::map<std::string, std::string>& drugs,
                                   const std::map<std::string, std::string>& proteins) {
    AffinityDataset pairs;
    pairs.drugs = drugs;
    pairs.proteins = proteins;
    for (const auto& [d, s] : drugs)
        for (const auto& [p, q] : proteins) pairs.records.push_back({d, p, 0.0, Measure::Kiba});
    const auto kb = predict_records(kiba.params, pairs, FeatureCache<float>::build(pairs, kiba.params.config));
    const auto db = predict_records(davis.params, pairs, FeatureCache<float>::build(pairs, davis.params.config));
    std::vector<PairPrediction> out;
    for (std::size_t i = 0; i < pairs.size(); ++i)
        out.push_back({pairs.records[i].drug_id, pairs.records[i].protein_id, kb[i], db[i]});
    return out;
}

std::vector<PairPrediction> read_predictions(const fs::path& path) {
    std::vector<PairPrediction> rows;
    for (const auto& r : detail::read_csv(path, {"drug_id", "protein_id", "kiba_pred", "pkd_pred"}))
        rows.push_back({r.fields[0], r.fields[1], detail::parse_number(path, r.line, r.fields[2]),
                        detail::parse_number(path, r.line, r.fields[3])});
    return rows;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"DeepGLSTM drug-target binding affinity: train, evaluate, predict, rank"};
    app.require_subcommand(1);
    app.set_help_all_flag("--help-all", "show help for every subcommand");

    // featurize
    std::string f_smiles, f_out, f_dump, f_power = "binarized";
    auto* featurize = app.add_subcommand("featurize", "write the 78-column atom feature matrix of a SMILES as CSV");
    featurize->add_option("--smiles", f_smiles, "input SMILES")->required();
    featurize->add_option("--out", f_out, "feature CSV path (default stdout)");
    featurize->add_option("--dump-norm", f_dump, "also write PREFIX_A1.csv, PREFIX_A2.csv, PREFIX_A3.csv");
    featurize->add_option("--power-mode", f_power, "binarized|raw")->capture_default_str();

    // train
    DataFlags t_data;
    ModelFlags t_model;
    std::size_t t_epochs = 1000, t_batch = 0, t_ckpt_every = 0, t_eval_every = 0;
    double t_lr = 0.0005;
    std::string t_ckpt, t_metrics, t_scatter, t_log;
    auto* train_cmd = app.add_subcommand("train", "train on a split of --data-dir and report test metrics");
    t_data.add(train_cmd, true);
    t_model.add(train_cmd);
    train_cmd->add_option("--epochs", t_epochs, "training epochs")->capture_default_str();
    train_cmd->add_option("--batch-size", t_batch, "mini-batch size (default 512, 128 for pKd)");
    train_cmd->add_option("--lr", t_lr, "Adam learning rate")->capture_default_str();
    train_cmd->add_option("--checkpoint", t_ckpt, "checkpoint path, written at the end and every --checkpoint-every epochs");
    train_cmd->add_option("--checkpoint-every", t_ckpt_every, "epochs between checkpoints (0 = end only)");
    train_cmd->add_option("--eval-every", t_eval_every, "epochs between test-set MSE log entries (0 = end only)");
    train_cmd->add_option("--log", t_log, "epoch log JSONL path (default stdout)");
    train_cmd->add_option("--metrics-out", t_metrics, "test-set metrics JSON");
    train_cmd->add_option("--scatter-out", t_scatter, "test-set measured,predicted CSV");

    // evaluate
    DataFlags e_data;
    std::string e_ckpt, e_metrics, e_scatter, e_split = "all";
    auto* evaluate_cmd = app.add_subcommand("evaluate", "evaluate a checkpoint on a dataset");
    e_data.add(evaluate_cmd, true);
    evaluate_cmd->add_option("--checkpoint", e_ckpt, "checkpoint to evaluate")->required();
    evaluate_cmd->add_option("--split", e_split, "all|train|test (split by --seed and --test-fraction)")
        ->check(CLI::IsMember({"all", "train", "test"}))
        ->capture_default_str();
    evaluate_cmd->add_option("--metrics-out", e_metrics, "metrics JSON path");
    evaluate_cmd->add_option("--scatter-out", e_scatter, "measured,predicted CSV path");

    // predict
    std::string p_ckpt, p_smiles, p_sequence;
    auto* predict_cmd = app.add_subcommand("predict", "predict the affinity of one drug-protein pair");
    predict_cmd->add_option("--checkpoint", p_ckpt, "model checkpoint")->required();
    predict_cmd->add_option("--smiles", p_smiles, "drug SMILES")->required();
    predict_cmd->add_option("--sequence", p_sequence, "protein sequence");

    // rank
    std::string r_pred, r_kiba, r_davis, r_dir, r_protein, r_out;
    std::size_t r_k = 18;
    auto* rank_cmd = app.add_subcommand("rank", "rank drugs per target by combined KIBA/pKd score");
    rank_cmd->add_option("--predictions", r_pred, "CSV drug_id,protein_id,kiba_pred,pkd_pred");
    rank_cmd->add_option("--kiba-checkpoint", r_kiba, "KIBA-trained checkpoint (with --davis-checkpoint, --data-dir)");
    rank_cmd->add_option("--davis-checkpoint", r_davis, "pKd-trained checkpoint");
    rank_cmd->add_option("--data-dir", r_dir, "directory with drugs.csv and proteins.csv to screen");
    rank_cmd->add_option("--protein-id", r_protein, "target to summarize (default: every target)");
    rank_cmd->add_option("--top-k", r_k, "rows in the summary per target")->capture_default_str();
    rank_cmd->add_option("--out", r_out, "full scored CSV, sorted by cb descending");

    // gradcheck
    std::uint64_t g_seed = 1;
    std::size_t g_coords = 200;
    double g_eps = 1e-5;
    auto* gradcheck_cmd = app.add_subcommand("gradcheck", "finite-difference check of the full model in double precision");
    gradcheck_cmd->add_option("--seed", g_seed, "seed")->capture_default_str();
    gradcheck_cmd->add_option("--coordinates", g_coords, "coordinates to sample")->capture_default_str();
    gradcheck_cmd->add_option("--eps", g_eps, "central difference step")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        const CLI::App* sub = app.get_subcommands().empty() ? &app : app.get_subcommands().front();
        std::cerr << sub->help() << json{{"error", "usage"}, {"message", e.what()}}.dump() << '\n';
        return 2;
    }

    try {
        if (*featurize) return cmd_featurize(f_smiles, f_out, f_dump, f_power);
        if (*gradcheck_cmd) return cmd_gradcheck(g_seed, g_coords, g_eps);

        if (*train_cmd) {
            TrainConfig cfg;
            cfg.model = t_model.config();
            cfg.measure = parse_measure(t_data.measure);
            cfg.adam.lr = t_lr;
            cfg.epochs = t_epochs;
            cfg.batch_size = t_batch ? t_batch : (cfg.measure == Measure::Kd ? 128 : 512);
            cfg.seed = t_data.seed;
            cfg.test_fraction = t_data.test_fraction;
            cfg.eval_every = t_eval_every;
            cfg.checkpoint_every = t_ckpt_every;
            if (!t_ckpt.empty()) cfg.checkpoint = t_ckpt;
            if (!t_log.empty()) cfg.log_path = t_log;
            else cfg.on_epoch = [](const EpochLog& l) { std::cout << l.jsonl() << std::endl; };

            const auto ds = t_data.load();
            const auto [train_set, test_set] = split(ds, cfg.seed, cfg.test_fraction);
            cfg.batch_size = std::min(cfg.batch_size, train_set.size());
            const auto result = train(cfg, train_set, &test_set);
            const auto ev = evaluate(result.params, test_set);
            write_eval_outputs(ev, t_metrics, t_scatter);
            std::cerr << "test " << ev.report.to_json().dump() << '\n';
            return 0;
        }

        if (*evaluate_cmd) {
            const auto ck = load_checkpoint(e_ckpt);
            auto ds = e_data.load();
            if (e_split != "all") {
                auto [tr, te] = split(ds, e_data.seed, e_data.test_fraction);
                ds = e_split == "train" ? tr : te;
            }
            const auto ev = evaluate(ck.params, ds);
            write_eval_outputs(ev, e_metrics, e_scatter);
            std::cout << ev.report.to_json().dump() << '\n';
            return 0;
        }

        if (*predict_cmd) {
            const auto ck = load_checkpoint(p_ckpt);
            if (ck.params.config.encoder == ProteinEncoderKind::BiLstm && p_sequence.empty())
                throw UsageError("--sequence is required for a model with a protein encoder");
            const auto drug = build_graph_inputs<float>(chem::parse_smiles(p_smiles), ck.params.config.power_mode);
            const auto protein = tokenize(p_sequence, ck.params.config.max_len);
            std::printf("%.9g\n", static_cast<double>(predict(ck.params, drug, protein)));
            return 0;
        }

        if (*rank_cmd) {
            std::vector<PairPrediction> rows;
            if (!r_pred.empty()) {
                rows = read_predictions(r_pred);
            } else {
                if (r_kiba.empty() || r_davis.empty() || r_dir.empty())
                    throw UsageError("rank needs --predictions, or --kiba-checkpoint, --davis-checkpoint and --data-dir");
                LoadReport rep;
                const auto drugs = load_drug_registry(fs::path(r_dir) / "drugs.csv", rep);
                auto proteins = load_protein_registry(fs::path(r_dir) / "proteins.csv");
                if (!r_protein.empty()) {
                    const auto it = proteins.find(r_protein);
                    if (it == proteins.end()) throw UnknownProtein("protein '" + r_protein + "' not in proteins.csv");
                    proteins = {*it};
                }
                rows = screen(load_checkpoint(r_kiba), load_checkpoint(r_davis), drugs, proteins);
            }
            const auto scored = sort_by_score(combined_scores(rows));
            std::size_t clipped = 0;
            for (const auto& s : scored) clipped += s.clipped;
            if (clipped) std::cerr << "warning: clipped " << clipped << " negative predictions to 0\n";
            if (!r_out.empty()) {
                std::ofstream out(r_out);
                if (!out) throw std::runtime_error("cannot write " + r_out);
                out << "drug_id,protein_id,kiba_pred,pkd_pred,cb\n";
                out.precision(9);
                for (const auto& s : scored)
                    out << s.drug_id << ',' << s.protein_id << ',' << s.kiba_pred << ',' << s.pkd_pred << ',' << s.cb << '\n';
            }
            std::vector<std::string> targets;
            if (!r_protein.empty()) targets.push_back(r_protein);
            else
                for (const auto& s : scored)
                    if (std::find(targets.begin(), targets.end(), s.protein_id) == targets.end()) targets.push_back(s.protein_id);
            std::sort(targets.begin(), targets.end());
            for (const auto& t : targets) {
                std::printf("%s\n%4s  %-20s %10s %10s %8s\n", t.c_str(), "rank", "drug_id", "kiba_pred", "pkd_pred", "cb");
                std::size_t i = 0;
                for (const auto& s : rank_top_k(scored, t, r_k))
                    std::printf("%4zu  %-20s %10.4f %10.4f %8.4f\n", ++i, s.drug_id.c_str(), s.kiba_pred, s.pkd_pred, s.cb);
            }
            return 0;
        }
    } catch (const UsageError& e) {
        std::cerr << json{{"error", "usage"}, {"message", e.what()}}.dump() << '\n';
        return 2;
    } catch (const chem::SmilesError& e) {
        std::cerr << json{{"error", "smiles"}, {"message", e.what()}}.dump() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << json{{"error", "runtime"}, {"message", e.what()}}.dump() << '\n';
        return 1;
    }
    return 0;
}
