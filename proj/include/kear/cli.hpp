#pragma once
// Single entry point wiring the pipeline:
//   ingest -> build-index -> augment -> train -> eval -> ensemble
// plus the synthetic-benchmark generator. One binary, one subcommand per
// stage; all randomness flows from --seed.

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "kear/corpus.hpp"
#include "kear/ensemble.hpp"
#include "kear/pipeline.hpp"
#include "kear/synth.hpp"
#include "kear/training.hpp"

namespace kear::cli {

struct RunConfig {
    TransformerConfig model;
    TrainConfig train;
    int min_count = 1;
};

inline void apply_config_entry(RunConfig& cfg, const std::string& key, const std::string& value) {
    auto as_bool = [&] {
        if (value == "1" || value == "true" || value == "yes") return true;
        if (value == "0" || value == "false" || value == "no") return false;
        throw std::runtime_error("config: bad boolean for " + key + ": " + value);
    };
    try {
        if (key == "epochs") cfg.train.epochs = std::stoi(value);
        else if (key == "batch_size") cfg.train.batch_size = std::stoi(value);
        else if (key == "learning_rate") cfg.train.learning_rate = std::stod(value);
        else if (key == "weight_decay") cfg.train.weight_decay = std::stod(value);
        else if (key == "decay_step") cfg.train.decay_step = std::stod(value);
        else if (key == "vat_enabled") cfg.train.vat_enabled = as_bool();
        else if (key == "vat_alpha") cfg.train.vat_alpha = std::stod(value);
        else if (key == "vat_epsilon") cfg.train.vat_epsilon = std::stod(value);
        else if (key == "vat_xi") cfg.train.vat_xi = std::stod(value);
        else if (key == "seed") cfg.train.seed = std::stoull(value);
        else if (key == "num_layers") cfg.model.num_layers = std::stoi(value);
        else if (key == "hidden_dim") cfg.model.hidden_dim = std::stoi(value);
        else if (key == "num_heads") cfg.model.num_heads = std::stoi(value);
        else if (key == "feedforward_dim") cfg.model.feedforward_dim = std::stoi(value);
        else if (key == "max_len") cfg.model.max_len = std::stoi(value);
        else if (key == "dropout_rate") cfg.model.dropout_rate = std::stod(value);
        else if (key == "min_count") cfg.min_count = std::stoi(value);
        else throw std::runtime_error("config: unknown key " + key);
    } catch (const std::invalid_argument&) {
        throw std::runtime_error("config: bad value for " + key + ": " + value);
    }
}

// Plain-text "key = value" file; '#' starts a comment.
inline RunConfig load_run_config(const std::string& path) {
    RunConfig cfg;
    if (path.empty()) return cfg;
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config file: " + path);
    std::string line;
    size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        size_t hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        std::string squeezed = squeeze_spaces(line);
        if (squeezed.empty()) continue;
        size_t eq = squeezed.find('=');
        if (eq == std::string::npos) {
            throw std::runtime_error(path + ":" + std::to_string(line_no) +
                                     ": expected key = value");
        }
        std::string key = squeeze_spaces(squeezed.substr(0, eq));
        std::string value = squeeze_spaces(squeezed.substr(eq + 1));
        apply_config_entry(cfg, key, value);
    }
    return cfg;
}

namespace detail {

inline std::vector<QuestionRecord> load_questions_auto(const std::string& path,
                                                       const std::string& format) {
    QuestionFormat f = format == "auto" ? detect_question_format(path)
                                        : parse_question_format(format);
    return load_questions(path, f);
}

inline std::string file_stem(const std::string& path) {
    return std::filesystem::path(path).stem().string();
}

// expands a trailing-component '*' pattern; plain paths pass through
inline std::vector<std::string> expand_glob(const std::string& pattern) {
    if (pattern.find('*') == std::string::npos) return {pattern};
    std::filesystem::path p(pattern);
    std::filesystem::path dir = p.parent_path().empty() ? "." : p.parent_path();
    std::string name = p.filename().string();
    size_t star = name.find('*');
    std::string prefix = name.substr(0, star);
    std::string suffix = name.substr(star + 1);
    std::vector<std::string> out;
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
        std::string fn = entry.path().filename().string();
        if (fn.size() < prefix.size() + suffix.size()) continue;
        if (fn.compare(0, prefix.size(), prefix) != 0) continue;
        if (fn.compare(fn.size() - suffix.size(), suffix.size(), suffix) != 0) continue;
        out.push_back(entry.path().string());
    }
    std::sort(out.begin(), out.end());
    if (out.empty()) throw std::runtime_error("no files match pattern: " + pattern);
    return out;
}

struct KnowledgeSources {
    std::optional<KnowledgeGraph> kg;
    std::optional<Dictionary> dict;
    std::optional<InvertedIndex> index;
    std::optional<ConceptMatcher> matcher;

    void load(const std::string& kg_path, const std::string& dict_path,
              const std::string& index_path, const std::vector<QuestionRecord>& records) {
        if (!kg_path.empty()) kg = load_kg(kg_path);
        if (!dict_path.empty()) dict = load_dictionary(dict_path);
        if (!index_path.empty()) index = InvertedIndex::load(index_path);
        if (kg) {
            bool needs_linking = std::any_of(records.begin(), records.end(),
                                             [](const QuestionRecord& r) {
                                                 return !r.question_concept;
                                             });
            if (needs_linking) matcher.emplace(kg->concept_vocabulary);
        }
    }
};

}  // namespace detail

inline int run_ingest(const std::string& questions, const std::string& format,
                      const std::string& out, const std::string& kg_in,
                      const std::string& kg_out, const std::string& dict_in,
                      const std::string& dict_out) {
    if (!questions.empty()) {
        auto records = detail::load_questions_auto(questions, format);
        save_questions(out, records);
        log_info("ingested " + std::to_string(records.size()) + " questions -> " + out);
    }
    if (!kg_in.empty()) {
        save_kg(kg_out, load_kg(kg_in));
    }
    if (!dict_in.empty()) {
        save_dictionary(dict_out, load_dictionary(dict_in));
    }
    return 0;
}

inline int run_build_index(const std::vector<std::string>& sources, const std::string& format,
                           const std::string& kg_path, const std::string& dict_path, double k1,
                           double b, const std::string& out) {
    std::optional<KnowledgeGraph> kg;
    std::optional<Dictionary> dict;
    if (!kg_path.empty()) kg = load_kg(kg_path);
    if (!dict_path.empty()) dict = load_dictionary(dict_path);
    std::vector<IndexedDocument> docs;
    for (const auto& source : sources) {
        auto records = detail::load_questions_auto(source, format);
        std::optional<ConceptMatcher> matcher;
        if (kg && std::any_of(records.begin(), records.end(),
                              [](const QuestionRecord& r) { return !r.question_concept; })) {
            matcher.emplace(kg->concept_vocabulary);
        }
        std::string name = detail::file_stem(source);
        for (const auto& rec : records) {
            docs.push_back(make_indexed_document(rec, name, kg ? &*kg : nullptr,
                                                 dict ? &*dict : nullptr,
                                                 matcher ? &*matcher : nullptr));
        }
    }
    InvertedIndex ix = build_index(std::move(docs), k1, b);
    ix.save(out);
    log_info("indexed " + std::to_string(ix.doc_count()) + " documents -> " + out);
    return 0;
}

inline int run_augment(const std::string& questions, const std::string& format,
                       const std::string& kg_path, const std::string& dict_path,
                       const std::string& index_path, size_t top_m, bool explain,
                       const std::string& out) {
    auto records = detail::load_questions_auto(questions, format);
    detail::KnowledgeSources src;
    src.load(kg_path, dict_path, index_path, records);
    AugmentOptions opts;
    opts.top_m = top_m;

    std::ostream* os = &std::cout;
    std::ofstream file;
    if (!out.empty()) {
        file.open(out);
        if (!file) throw std::runtime_error("cannot write output file: " + out);
        os = &file;
    }
    for (const auto& rec : records) {
        if (explain) {
            auto bundles = build_bundles(rec, src.kg ? &*src.kg : nullptr,
                                         src.dict ? &*src.dict : nullptr,
                                         src.index ? &*src.index : nullptr, opts,
                                         src.matcher ? &*src.matcher : nullptr);
            (*os) << render_explain(rec, bundles) << "\n";
        } else {
            for (const auto& r : augment_question(rec, src.kg ? &*src.kg : nullptr,
                                                  src.dict ? &*src.dict : nullptr,
                                                  src.index ? &*src.index : nullptr, opts,
                                                  src.matcher ? &*src.matcher : nullptr)) {
                json j;
                j["id"] = r.id;
                j["question"] = r.question;
                j["n_choices"] = r.n_choices;
                j["choice_index"] = r.choice_index;
                j["choice"] = r.choice;
                if (r.answer_index) j["answer"] = *r.answer_index;
                j["kg"] = r.bundle.kg_text;
                j["dict"] = r.bundle.dict_text;
                j["train"] = r.bundle.train_text;
                (*os) << j.dump() << "\n";
            }
        }
    }
    return 0;
}

inline int run_train(const std::string& config_path,
                     const std::vector<std::string>& overrides, const std::string& augmented,
                     const std::string& dev, const std::string& out,
                     std::optional<uint64_t> seed_flag) {
    RunConfig cfg = load_run_config(config_path);
    for (const auto& kv : overrides) {
        size_t eq = kv.find('=');
        if (eq == std::string::npos) throw std::runtime_error("--set expects key=value, got " + kv);
        apply_config_entry(cfg, squeeze_spaces(kv.substr(0, eq)),
                           squeeze_spaces(kv.substr(eq + 1)));
    }
    if (seed_flag) cfg.train.seed = *seed_flag;

    auto train_qs = group_augmented(load_augmented(augmented));
    std::vector<AugmentedQuestion> dev_qs;
    if (!dev.empty()) dev_qs = group_augmented(load_augmented(dev));

    Tokenizer tok = build_vocab(vocab_corpus(train_qs), cfg.min_count);
    cfg.model.vocab_size = tok.vocab_size();
    cfg.model.validate();
    log_info("vocab size " + std::to_string(cfg.model.vocab_size));

    auto train_ex = to_train_examples(train_qs, tok, cfg.model.max_len);
    auto dev_ex = to_train_examples(dev_qs, tok, cfg.model.max_len);
    ModelParams params = ModelParams::init(cfg.model, cfg.train.seed);
    TrainResult result = train(train_ex, dev_ex, std::move(params), cfg.model, cfg.train,
                               &std::cout);
    save_checkpoint(out, cfg.model, tok, result.best_params);
    if (!result.epochs.empty() && !dev_ex.empty()) {
        std::cout << "best_epoch=" << result.best_epoch
                  << " best_dev_acc=" << result.best_report.accuracy << "\n";
    }
    log_info("checkpoint -> " + out);
    return 0;
}

inline int run_eval(const std::string& checkpoint_path, const std::string& augmented,
                    const std::string& out, const std::string& report_path) {
    Checkpoint cp = load_checkpoint(checkpoint_path);
    auto questions = group_augmented(load_augmented(augmented));
    if (questions.empty()) throw std::runtime_error("eval: no questions in " + augmented);

    std::vector<std::string> ids;
    std::vector<ChoiceDistribution> probs;
    std::vector<int> preds;
    long correct = 0, answered = 0;
    for (const auto& q : questions) {
        TrainExample ex = to_train_example(q, cp.tokenizer, cp.config.max_len);
        ChoiceDistribution dist = predict(ex.inputs, cp.params, cp.config);
        int pred = dist.argmax();
        if (q.answer_index) {
            ++answered;
            if (pred == *q.answer_index) ++correct;
        }
        ids.push_back(q.id);
        probs.push_back(std::move(dist));
        preds.push_back(pred);
    }
    if (!out.empty()) save_predictions(out, ids, probs, preds);
    double accuracy = answered > 0 ? static_cast<double>(correct) / answered : 0.0;
    if (answered > 0) {
        std::cout << "questions=" << questions.size() << " accuracy=" << accuracy << "\n";
    }
    if (!report_path.empty()) {
        json report;
        report["questions"] = questions.size();
        if (answered > 0) report["accuracy"] = accuracy;
        json per;
        for (size_t i = 0; i < ids.size(); ++i) {
            per.push_back({{"id", ids[i]}, {"pred", preds[i]}, {"probs", probs[i].probs}});
        }
        report["predictions"] = std::move(per);
        std::ofstream rf(report_path);
        if (!rf) throw std::runtime_error("cannot write report: " + report_path);
        rf << report.dump(2) << "\n";
    }
    return 0;
}

inline int run_ensemble(const std::vector<std::string>& prediction_args, const std::string& dev,
                        const std::string& out) {
    auto dev_qs = group_augmented(load_augmented(dev));
    std::vector<std::string> ids;
    std::vector<int> answers;
    for (const auto& q : dev_qs) {
        if (!q.answer_index) throw std::runtime_error("ensemble: dev question " + q.id +
                                                      " has no answer");
        ids.push_back(q.id);
        answers.push_back(*q.answer_index);
    }

    std::vector<std::string> files;
    for (const auto& arg : prediction_args) {
        for (auto& f : detail::expand_glob(arg)) files.push_back(std::move(f));
    }
    if (files.empty()) throw std::runtime_error("ensemble: no prediction files");

    std::vector<ModelPredictions> models;
    std::vector<double> accuracies;
    for (const auto& f : files) {
        ModelPredictions m = load_predictions(f, ids);
        long correct = 0;
        for (size_t i = 0; i < ids.size(); ++i) {
            if (m.preds[i] == answers[i]) ++correct;
        }
        accuracies.push_back(static_cast<double>(correct) / ids.size());
        models.push_back(std::move(m));
    }
    // rank the models by dev accuracy, stable on ties
    std::vector<size_t> order(models.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](size_t a, size_t b) { return accuracies[a] > accuracies[b]; });
    std::vector<ModelPredictions> ranked;
    for (size_t i : order) ranked.push_back(std::move(models[i]));

    PrefixSelection sel = greedy_prefix_select(ranked, ids, answers);
    std::cout << "models=" << ranked.size() << " selected=" << sel.roster_size
              << " ensemble_acc=" << sel.report.accuracy << "\n";

    json report;
    report["selected_n"] = sel.roster_size;
    report["ensemble_accuracy"] = sel.report.accuracy;
    json per_model = json::array();
    for (size_t i = 0; i < order.size(); ++i) {
        per_model.push_back({{"file", ranked[i].name},
                             {"dev_accuracy", accuracies[order[i]]},
                             {"prefix_ensemble_accuracy", sel.prefix_accuracies[i]}});
    }
    report["models"] = std::move(per_model);
    json per_question = json::array();
    for (const auto& r : sel.report.per_question) {
        per_question.push_back({{"id", r.id}, {"pred", r.predicted}, {"correct", r.correct}});
    }
    report["per_question"] = std::move(per_question);
    if (!out.empty()) {
        std::ofstream of(out);
        if (!of) throw std::runtime_error("cannot write report: " + out);
        of << report.dump(2) << "\n";
    }
    return 0;
}

inline int run_synth(const std::string& mode, uint64_t seed, int num_train, int num_dev,
                     int vocab_size, int choices, const std::string& out_dir) {
    SynthConfig cfg;
    cfg.mode = parse_synth_mode(mode);
    cfg.seed = seed;
    cfg.num_train = num_train;
    cfg.num_dev = num_dev;
    cfg.vocab_size = vocab_size;
    cfg.num_choices = choices;
    SynthData data = generate_synthetic(cfg);
    write_synthetic(out_dir, data);
    std::cout << "train=" << data.train.size() << " dev=" << data.dev.size()
              << " triples=" << data.kg.triples.size() << " terms=" << data.dict.term_list.size()
              << " -> " << out_dir << "\n";
    return 0;
}

inline int run(std::vector<std::string> args) {
    CLI::App app{"knowledge-augmented multiple-choice QA pipeline"};
    app.require_subcommand(1);
    uint64_t seed = 0;
    bool seed_given = false;
    auto* seed_opt = app.add_option("--seed", seed, "global RNG seed");

    // ingest
    auto* ingest = app.add_subcommand("ingest", "validate and normalize corpus files");
    std::string in_questions, in_format = "auto", in_out = "questions.jsonl";
    std::string in_kg, in_kg_out, in_dict, in_dict_out;
    ingest->add_option("--questions", in_questions, "questions jsonl");
    ingest->add_option("--format", in_format, "csqa-jsonl | generic-jsonl | auto");
    ingest->add_option("--out", in_out, "output generic-jsonl path");
    ingest->add_option("--kg", in_kg, "kg tsv to validate");
    ingest->add_option("--kg-out", in_kg_out, "normalized kg tsv output");
    ingest->add_option("--dict", in_dict, "dictionary tsv to validate");
    ingest->add_option("--dict-out", in_dict_out, "normalized dictionary tsv output");

    // build-index
    auto* build = app.add_subcommand("build-index", "build the BM25 retrieval index");
    std::vector<std::string> bi_sources;
    std::string bi_format = "auto", bi_kg, bi_dict, bi_out = "index.json";
    double bi_k1 = kDefaultBm25K1, bi_b = kDefaultBm25B;
    build->add_option("--source", bi_sources, "training question files")->required();
    build->add_option("--format", bi_format, "question file format");
    build->add_option("--kg", bi_kg, "kg tsv");
    build->add_option("--dict", bi_dict, "dictionary tsv");
    build->add_option("--k1", bi_k1, "BM25 k1");
    build->add_option("--b", bi_b, "BM25 b");
    build->add_option("--out", bi_out, "index output path");

    // augment
    auto* augment = app.add_subcommand("augment", "attach knowledge to questions");
    std::string au_questions, au_format = "auto", au_kg, au_dict, au_index, au_out;
    size_t au_m = 10;
    bool au_explain = false;
    augment->add_option("--questions", au_questions, "questions file")->required();
    augment->add_option("--format", au_format, "question file format");
    augment->add_option("--kg", au_kg, "kg tsv");
    augment->add_option("--dict", au_dict, "dictionary tsv");
    augment->add_option("--index", au_index, "retrieval index");
    augment->add_option("--m", au_m, "retrieved questions per query");
    augment->add_option("--out", au_out, "output path (stdout when omitted)");
    augment->add_flag("--explain", au_explain, "human-readable breakdown");

    // train
    auto* train_cmd = app.add_subcommand("train", "train the encoder");
    std::string tr_config, tr_augmented, tr_dev, tr_out = "checkpoint.json";
    std::vector<std::string> tr_overrides;
    train_cmd->add_option("--config", tr_config, "key = value config file");
    train_cmd->add_option("--augmented", tr_augmented, "augmented training jsonl")->required();
    train_cmd->add_option("--dev", tr_dev, "augmented dev jsonl");
    train_cmd->add_option("--out", tr_out, "checkpoint output path");
    train_cmd->add_option("--set", tr_overrides, "config overrides key=value (flags win)");

    // eval
    auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint");
    std::string ev_checkpoint, ev_augmented, ev_out, ev_report;
    eval_cmd->add_option("--checkpoint", ev_checkpoint, "checkpoint path")->required();
    eval_cmd->add_option("--augmented", ev_augmented, "augmented questions jsonl")->required();
    eval_cmd->add_option("--out", ev_out, "predictions jsonl output");
    eval_cmd->add_option("--report", ev_report, "report json output");

    // ensemble
    auto* ens = app.add_subcommand("ensemble", "majority-vote ensemble selection");
    std::vector<std::string> en_predictions;
    std::string en_dev, en_out;
    ens->add_option("--predictions", en_predictions, "prediction files (glob ok)")->required();
    ens->add_option("--dev", en_dev, "augmented dev jsonl with answers")->required();
    ens->add_option("--out", en_out, "report json output");

    // synth
    auto* synth_cmd = app.add_subcommand("synth", "generate the synthetic benchmark");
    std::string sy_mode = "kg-dict", sy_out = "synthetic";
    int sy_train = 2000, sy_dev = 500, sy_vocab = 200, sy_choices = 4;
    synth_cmd->add_option("--mode", sy_mode, "kg-dict | train-dup");
    synth_cmd->add_option("--num-train", sy_train, "training questions");
    synth_cmd->add_option("--num-dev", sy_dev, "dev questions");
    synth_cmd->add_option("--vocab-size", sy_vocab, "synthetic word pool size");
    synth_cmd->add_option("--choices", sy_choices, "choices per question");
    synth_cmd->add_option("--out-dir", sy_out, "output directory");

    std::vector<const char*> argv;
    argv.push_back("kear");
    for (const auto& a : args) argv.push_back(a.c_str());
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }
    seed_given = seed_opt->count() > 0;

    try {
        if (*ingest) {
            return run_ingest(in_questions, in_format, in_out, in_kg, in_kg_out, in_dict,
                              in_dict_out);
        }
        if (*build) {
            return run_build_index(bi_sources, bi_format, bi_kg, bi_dict, bi_k1, bi_b, bi_out);
        }
        if (*augment) {
            return run_augment(au_questions, au_format, au_kg, au_dict, au_index, au_m,
                               au_explain, au_out);
        }
        if (*train_cmd) {
            return run_train(tr_config, tr_overrides, tr_augmented, tr_dev, tr_out,
                             seed_given ? std::optional<uint64_t>(seed) : std::nullopt);
        }
        if (*eval_cmd) return run_eval(ev_checkpoint, ev_augmented, ev_out, ev_report);
        if (*ens) return run_ensemble(en_predictions, en_dev, en_out);
        if (*synth_cmd) {
            return run_synth(sy_mode, seed, sy_train, sy_dev, sy_vocab, sy_choices, sy_out);
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}

inline int run(int argc, char** argv) {
    std::vector<std::string> args;
    for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
    return run(std::move(args));
}

}  // namespace kear::cli
