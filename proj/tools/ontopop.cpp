// ontopop command-line interface: pipeline orchestration plus standalone
// entry points for each stage. Every subcommand takes --config/--seed/--out;
// stage-specific inputs come from explicit flags so stages stay file-to-file.

#include <CLI11.hpp>
#include <cmath>
#include <filesystem>
#include <iostream>
#include <map>
#include <nlohmann/json.hpp>

#include "ontopop/pipeline.hpp"
#include "ontopop/util.hpp"

namespace fs = std::filesystem;
using namespace ontopop;

namespace {

struct CommonOpts {
  std::string config_path;
  uint64_t seed = 0;
  bool seed_set = false;
  std::string out;
};

void add_common(CLI::App* cmd, CommonOpts& opts) {
  cmd->add_option("--config", opts.config_path, "pipeline config file");
  cmd->add_option("--seed", opts.seed, "override the config seed")
      ->each([&](const std::string&) { opts.seed_set = true; });
  cmd->add_option("--out", opts.out, "output file or directory");
}

PipelineConfig load_config(const CommonOpts& opts, bool required = true) {
  PipelineConfig cfg;
  if (!opts.config_path.empty())
    cfg = PipelineConfig::load(opts.config_path);
  else if (required)
    throw ConfigError("--config is required for this subcommand");
  if (opts.seed_set) cfg.seed = opts.seed;
  if (!opts.out.empty()) cfg.out_dir = opts.out;
  return cfg;
}

std::shared_ptr<const OntologySchema> load_schema_for(
    const PipelineConfig& cfg) {
  std::string text = cfg.schema_path.empty()
                         ? default_schema_text()
                         : read_file(cfg.schema_path);
  return std::make_shared<const OntologySchema>(OntologySchema::load(text));
}

void emit(const std::string& out_path, const std::string& data) {
  if (out_path.empty())
    std::cout << data;
  else
    write_file(out_path, data);
}

// eval format: JSON-Lines {doc_id, sent_index, start_tok, end_tok,
// labels:[...]} (or a single "label"). Keyed by the mention span.
std::map<std::string, std::set<TypePath>> load_eval_file(
    const std::string& path) {
  std::map<std::string, std::set<TypePath>> out;
  for (const auto& line : split_lines(read_file(path))) {
    if (trim(line).empty()) continue;
    nlohmann::json obj = nlohmann::json::parse(line);
    std::string key = obj.at("doc_id").get<std::string>() + ":" +
                      std::to_string(obj.at("sent_index").get<size_t>()) +
                      ":" + std::to_string(obj.at("start_tok").get<size_t>()) +
                      "-" + std::to_string(obj.at("end_tok").get<size_t>());
    std::set<TypePath>& labels = out[key];
    if (obj.contains("labels")) {
      for (const auto& l : obj.at("labels"))
        labels.insert(TypePath::parse(l.get<std::string>()));
    } else if (obj.contains("label")) {
      std::string l = obj.at("label").get<std::string>();
      if (!l.empty()) labels.insert(TypePath::parse(l));
    }
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"person-ontology population pipeline"};
  app.require_subcommand(1);

  CommonOpts run_opts;
  auto* cmd_run = app.add_subcommand("run", "run the full pipeline");
  add_common(cmd_run, run_opts);

  CommonOpts ingest_opts;
  auto* cmd_ingest =
      app.add_subcommand("ingest", "split and tokenize a corpus directory");
  std::string ingest_corpus;
  cmd_ingest->add_option("--corpus", ingest_corpus, "corpus directory");
  add_common(cmd_ingest, ingest_opts);

  CommonOpts annotate_opts;
  auto* cmd_annotate = app.add_subcommand(
      "annotate", "run gazetteer/pattern annotators and labeling functions");
  add_common(cmd_annotate, annotate_opts);

  CommonOpts trainc_opts;
  std::string trainc_data;
  auto* cmd_trainc = app.add_subcommand(
      "train-classifier", "train the entity classifier from JSON-Lines data");
  cmd_trainc->add_option("--data", trainc_data,
                         "training examples (JSON-Lines); default: bootstrap "
                         "from the annotated corpus");
  add_common(cmd_trainc, trainc_opts);

  CommonOpts classify_opts;
  std::string classify_model;
  auto* cmd_classify =
      app.add_subcommand("classify", "assign fine-grained labels to mentions");
  cmd_classify->add_option("--model", classify_model, "classifier checkpoint");
  add_common(cmd_classify, classify_opts);

  CommonOpts trainr_opts;
  std::string trainr_triples;
  auto* cmd_trainr = app.add_subcommand(
      "train-relemb", "train relation embeddings from a triple TSV");
  cmd_trainr->add_option("--triples", trainr_triples, "triple TSV file");
  add_common(cmd_trainr, trainr_opts);

  CommonOpts extract_opts;
  std::string extract_model, extract_candidates, extract_train;
  auto* cmd_extract = app.add_subcommand(
      "extract-relations",
      "classify candidate triples against a trained embedding space");
  cmd_extract->add_option("--model", extract_model, "embedding checkpoint")
      ->required();
  cmd_extract
      ->add_option("--candidates", extract_candidates, "candidate triple TSV")
      ->required();
  cmd_extract
      ->add_option("--train-triples", extract_train,
                   "triples used to fit per-relation thresholds")
      ->required();
  add_common(cmd_extract, extract_opts);

  CommonOpts trainl_opts;
  std::string trainl_edges, trainl_model = "pgnn";
  int trainl_seeds = 5;
  auto* cmd_trainl = app.add_subcommand(
      "train-linkpred", "train link predictors and report ROC AUC");
  cmd_trainl->add_option("--edges", trainl_edges, "edge-list TSV")->required();
  cmd_trainl->add_option("--model", trainl_model, "gcn or pgnn");
  cmd_trainl->add_option("--seeds", trainl_seeds, "number of seeds");
  add_common(cmd_trainl, trainl_opts);

  CommonOpts linkp_opts;
  std::string linkp_edges;
  double linkp_threshold = 0.5;
  auto* cmd_linkp =
      app.add_subcommand("link-predict", "predict missing edges in a graph");
  cmd_linkp->add_option("--edges", linkp_edges, "edge-list TSV")->required();
  cmd_linkp->add_option("--threshold", linkp_threshold, "score threshold");
  add_common(cmd_linkp, linkp_opts);

  CommonOpts populate_opts;
  std::string populate_mentions, populate_relations;
  auto* cmd_populate = app.add_subcommand(
      "populate", "build the ontology graph from mentions and relations");
  cmd_populate
      ->add_option("--mentions", populate_mentions, "mentions JSON-Lines")
      ->required();
  cmd_populate->add_option("--relations", populate_relations,
                           "relations TSV (head rel tail conf prov)");
  add_common(cmd_populate, populate_opts);

  CommonOpts export_opts;
  std::string export_journal;
  auto* cmd_export = app.add_subcommand(
      "export", "replay a graph journal and write canonical exports");
  cmd_export->add_option("--journal", export_journal, "graph journal file")
      ->required();
  add_common(cmd_export, export_opts);

  CommonOpts stats_opts;
  auto* cmd_stats = app.add_subcommand(
      "stats", "corpus statistics over the annotated mentions");
  add_common(cmd_stats, stats_opts);

  CommonOpts eval_opts;
  std::string eval_pred, eval_gold;
  auto* cmd_eval =
      app.add_subcommand("eval", "macro/micro F1 of predictions vs gold");
  cmd_eval->add_option("--pred", eval_pred, "predicted labels JSON-Lines")
      ->required();
  cmd_eval->add_option("--gold", eval_gold, "gold labels JSON-Lines")
      ->required();
  add_common(cmd_eval, eval_opts);

  CLI11_PARSE(app, argc, argv);

  try {
    if (cmd_run->parsed()) {
      PipelineConfig cfg = load_config(run_opts);
      nlohmann::json report = run_pipeline(cfg);
      std::cout << report.dump(2) << "\n";
      return 0;
    }

    if (cmd_ingest->parsed()) {
      PipelineConfig cfg = load_config(ingest_opts, ingest_corpus.empty());
      std::string dir = ingest_corpus.empty() ? cfg.corpus_dir : ingest_corpus;
      Corpus corpus = load_corpus_dir(dir);
      std::string jsonl;
      for (const auto& s : corpus.sentences) jsonl += sentences_to_jsonl(s);
      emit(ingest_opts.out, jsonl);
      return 0;
    }

    if (cmd_annotate->parsed()) {
      PipelineConfig cfg = load_config(annotate_opts);
      cfg.validate_for_run();
      Corpus corpus = load_corpus_dir(cfg.corpus_dir);
      auto schema = load_schema_for(cfg);
      auto gazetteers = cfg.gazetteers_path.empty()
                            ? std::vector<Gazetteer>{}
                            : load_gazetteers(read_file(cfg.gazetteers_path));
      auto rules = load_rules(cfg.rules_path.empty()
                                  ? default_rules_text()
                                  : read_file(cfg.rules_path));
      auto lfs = load_labeling_functions(
          cfg.lfs_path.empty() ? default_labeling_functions_text()
                               : read_file(cfg.lfs_path),
          *schema);
      auto mentions = annotate_corpus(corpus, gazetteers, rules);
      auto candidates = corpus_relation_candidates(corpus, mentions, lfs);
      fs::create_directories(cfg.out_dir);
      write_file((fs::path(cfg.out_dir) / "mentions.jsonl").string(),
                 mentions_to_jsonl(mentions));
      write_file((fs::path(cfg.out_dir) / "candidates.tsv").string(),
                 candidates_to_tsv(candidates));
      std::cout << "mentions=" << mentions.size()
                << " candidates=" << candidates.size() << "\n";
      return 0;
    }

    if (cmd_trainc->parsed()) {
      PipelineConfig cfg = load_config(trainc_opts);
      auto schema = load_schema_for(cfg);
      std::vector<TrainingExample> examples;
      if (!trainc_data.empty()) {
        examples = examples_from_jsonl(read_file(trainc_data), *schema);
      } else {
        cfg.validate_for_run();
        Corpus corpus = load_corpus_dir(cfg.corpus_dir);
        auto gazetteers =
            cfg.gazetteers_path.empty()
                ? std::vector<Gazetteer>{}
                : load_gazetteers(read_file(cfg.gazetteers_path));
        auto rules = load_rules(cfg.rules_path.empty()
                                    ? default_rules_text()
                                    : read_file(cfg.rules_path));
        auto mentions = annotate_corpus(corpus, gazetteers, rules);
        examples = bootstrap_examples(corpus, mentions, *schema,
                                      cfg.classifier.window);
      }
      ClassifierConfig ccfg = cfg.classifier;
      ccfg.seed = derive_seed(cfg.seed, "train-classifier");
      TrainResult res = train_classifier(examples, *schema, ccfg);
      std::string out = trainc_opts.out.empty() ? "classifier.model"
                                                : trainc_opts.out;
      res.model.save(out);
      std::cout << "examples=" << examples.size()
                << " final_loss=" << (res.epoch_loss.empty()
                                          ? 0.0
                                          : res.epoch_loss.back())
                << " model=" << out << "\n";
      return 0;
    }

    if (cmd_classify->parsed()) {
      PipelineConfig cfg = load_config(classify_opts);
      cfg.validate_for_run();
      if (classify_model.empty()) classify_model = cfg.classifier_model_path;
      if (classify_model.empty())
        throw MissingModel("classify requires --model or classifier_model");
      ClassifierModel model = ClassifierModel::load(classify_model);
      auto schema = load_schema_for(cfg);
      Corpus corpus = load_corpus_dir(cfg.corpus_dir);
      auto gazetteers = cfg.gazetteers_path.empty()
                            ? std::vector<Gazetteer>{}
                            : load_gazetteers(read_file(cfg.gazetteers_path));
      auto rules = load_rules(cfg.rules_path.empty()
                                  ? default_rules_text()
                                  : read_file(cfg.rules_path));
      auto mentions = annotate_corpus(corpus, gazetteers, rules);
      auto typed = classify_mentions(model, corpus, mentions, *schema,
                                     cfg.decode_threshold);
      emit(classify_opts.out, mentions_to_jsonl(typed));
      return 0;
    }

    if (cmd_trainr->parsed()) {
      PipelineConfig cfg = load_config(trainr_opts);
      auto schema = load_schema_for(cfg);
      if (trainr_triples.empty())
        throw ConfigError("train-relemb requires --triples");
      auto triples = triples_from_tsv(read_file(trainr_triples));
      RelEmbedConfig rcfg = cfg.relemb;
      rcfg.seed = derive_seed(cfg.seed, "train-relemb");
      TripleEmbeddingSpace space = train_embeddings(triples, *schema, rcfg);
      std::string out =
          trainr_opts.out.empty() ? "relemb.model" : trainr_opts.out;
      space.save(out);
      std::cout << "triples=" << triples.size() << " entities="
                << space.entity_names().size() << " model=" << out << "\n";
      return 0;
    }

    if (cmd_extract->parsed()) {
      PipelineConfig cfg = load_config(extract_opts, false);
      TripleEmbeddingSpace space = TripleEmbeddingSpace::load(extract_model);
      auto train = triples_from_tsv(read_file(extract_train));
      auto candidates = triples_from_tsv(read_file(extract_candidates));

      // Corrupted negatives for threshold fitting, filtered and seeded.
      Rng rng(derive_seed(cfg.seed, "extract-relations"));
      std::vector<Triple> negs;
      const auto& ents = space.entity_names();
      for (const auto& t : train) {
        Triple neg = t;
        for (int attempt = 0; attempt < 100; ++attempt) {
          neg = t;
          std::string& slot = rng.uniform_int(2) == 0 ? neg.head : neg.tail;
          slot = ents[rng.uniform_int(ents.size())];
          if (neg.head != neg.tail &&
              std::find(train.begin(), train.end(), neg) == train.end())
            break;
        }
        negs.push_back(neg);
      }
      auto thresholds = fit_thresholds(space, train, negs);

      std::string tsv;
      size_t accepted = 0;
      for (const auto& c : candidates) {
        if (space.entity_id(c.head) < 0 || space.entity_id(c.tail) < 0)
          continue;
        if (!classify_triple(c, space, thresholds)) continue;
        double conf = 1.0 / (1.0 + space.score(c));
        tsv += c.head + "\t" + c.rel + "\t" + c.tail + "\t" +
               format_double(conf) + "\trel_model\n";
        ++accepted;
      }
      emit(extract_opts.out, tsv);
      std::cerr << "candidates=" << candidates.size()
                << " accepted=" << accepted << "\n";
      return 0;
    }

    if (cmd_trainl->parsed()) {
      PipelineConfig cfg = load_config(trainl_opts, false);
      PersonGraph graph = graph_from_edgelist_tsv(read_file(trainl_edges));
      LinkModelKind kind = link_model_from_name(trainl_model);
      std::vector<double> aucs;
      nlohmann::json per_seed = nlohmann::json::array();
      for (int s = 0; s < trainl_seeds; ++s) {
        LinkPredConfig lcfg = cfg.link;
        lcfg.seed = derive_seed(cfg.seed + static_cast<uint64_t>(s),
                                "train-linkpred");
        EdgeSplit split = split_edges(graph, 0.8, 0.1, lcfg.seed);
        LinkTrainResult res = train_link_predictor(graph, split, kind, lcfg);
        std::vector<double> scores;
        std::vector<int> labels;
        for (auto [u, v] : split.test_pos) {
          scores.push_back(res.model.score(u, v));
          labels.push_back(1);
        }
        for (auto [u, v] : split.test_neg) {
          scores.push_back(res.model.score(u, v));
          labels.push_back(0);
        }
        double auc = roc_auc(scores, labels);
        aucs.push_back(auc);
        per_seed.push_back({{"seed", lcfg.seed}, {"roc_auc", auc}});
      }
      double mean = 0.0;
      for (double a : aucs) mean += a;
      mean /= static_cast<double>(aucs.size());
      double var = 0.0;
      for (double a : aucs) var += (a - mean) * (a - mean);
      double sd = aucs.size() > 1
                      ? std::sqrt(var / static_cast<double>(aucs.size() - 1))
                      : 0.0;
      nlohmann::json metrics = {{"model", trainl_model},
                                {"seed", cfg.seed},
                                {"roc_auc", mean},
                                {"std_dev", sd},
                                {"per_seed", per_seed}};
      emit(trainl_opts.out, metrics.dump(2) + "\n");
      return 0;
    }

    if (cmd_linkp->parsed()) {
      PipelineConfig cfg = load_config(linkp_opts, false);
      PersonGraph graph = graph_from_edgelist_tsv(read_file(linkp_edges));
      LinkPredConfig lcfg = cfg.link;
      lcfg.seed = derive_seed(cfg.seed, "link-predict");
      EdgeSplit split = split_edges(graph, 1.0, 0.0, lcfg.seed);
      LinkTrainResult res =
          train_link_predictor(graph, split, cfg.link_model, lcfg);
      std::string tsv;
      for (const auto& pe :
           augment_graph(graph, res.model, linkp_threshold)) {
        tsv += graph.names[pe.u] + "\t" + graph.names[pe.v] + "\t" +
               format_double(pe.score) + "\n";
      }
      emit(linkp_opts.out, tsv);
      return 0;
    }

    if (cmd_populate->parsed()) {
      PipelineConfig cfg = load_config(populate_opts);
      auto schema = load_schema_for(cfg);
      auto mentions = mentions_from_jsonl(read_file(populate_mentions));
      OntologyGraph graph(schema);
      fs::create_directories(cfg.out_dir);
      std::ofstream journal(
          (fs::path(cfg.out_dir) / "graph.journal").string(),
          std::ios::binary);
      graph.set_journal(&journal);
      for (const auto& m : mentions)
        if (m.is_person()) graph.resolve_person(m);
      // Same nearest-person attribute policy as the pipeline.
      std::map<std::pair<std::string, size_t>, std::vector<EntityMention>>
          by_sentence;
      for (const auto& m : mentions)
        by_sentence[{m.doc_id, m.sent_index}].push_back(m);
      size_t attributes = 0;
      for (const auto& [key, ms] : by_sentence) {
        std::vector<const EntityMention*> persons;
        for (const auto& m : ms)
          if (m.is_person()) persons.push_back(&m);
        if (persons.empty()) continue;
        for (const auto& m : ms) {
          if (m.is_person()) continue;
          auto label = primary_label(m);
          if (!label) continue;
          const EntityMention* best = nullptr;
          size_t best_dist = std::numeric_limits<size_t>::max();
          for (const auto* p : persons) {
            size_t dist = p->last_tok < m.first_tok
                              ? m.first_tok - p->last_tok
                              : (m.last_tok < p->first_tok
                                     ? p->first_tok - m.last_tok
                                     : 0);
            if (dist < best_dist ||
                (dist == best_dist && best && p->first_tok < best->first_tok)) {
              best_dist = dist;
              best = p;
            }
          }
          graph.attach_attribute(graph.resolve_person(*best), *label,
                                 normalize_ws(m.surface), m.provenance);
          ++attributes;
        }
      }
      size_t edges = 0;
      if (!populate_relations.empty()) {
        for (const auto& line :
             split_lines(read_file(populate_relations))) {
          if (trim(line).empty()) continue;
          auto fields = split_on(line, '\t');
          if (fields.size() < 3)
            throw ParseError("relations line needs >= 3 fields");
          RelationEdge e;
          e.head = graph.resolve_person_surface(fields[0]);
          e.relation = fields[1];
          e.tail = graph.resolve_person_surface(fields[2]);
          e.confidence = fields.size() > 3 ? std::stod(fields[3]) : 1.0;
          e.provenance = fields.size() > 4
                             ? edge_provenance_from_name(fields[4])
                             : EdgeProvenance::labeling_function;
          if (graph.add_relation(e)) ++edges;
        }
      }
      write_file((fs::path(cfg.out_dir) / "graph.nt").string(),
                 graph.export_ntriples());
      write_file((fs::path(cfg.out_dir) / "graph_edges.tsv").string(),
                 graph.export_edgelist());
      std::cout << "persons=" << graph.nodes().size()
                << " attributes=" << attributes << " edges=" << edges << "\n";
      return 0;
    }

    if (cmd_export->parsed()) {
      PipelineConfig cfg = load_config(export_opts);
      auto schema = load_schema_for(cfg);
      OntologyGraph graph = OntologyGraph::replay_journal(
          read_file(export_journal), schema);
      fs::create_directories(cfg.out_dir);
      write_file((fs::path(cfg.out_dir) / "graph.nt").string(),
                 graph.export_ntriples());
      write_file((fs::path(cfg.out_dir) / "graph_edges.tsv").string(),
                 graph.export_edgelist());
      std::cout << "nodes=" << graph.nodes().size()
                << " edges=" << graph.edges().size() << "\n";
      return 0;
    }

    if (cmd_stats->parsed()) {
      PipelineConfig cfg = load_config(stats_opts);
      cfg.validate_for_run();
      Corpus corpus = load_corpus_dir(cfg.corpus_dir);
      auto gazetteers = cfg.gazetteers_path.empty()
                            ? std::vector<Gazetteer>{}
                            : load_gazetteers(read_file(cfg.gazetteers_path));
      auto rules = load_rules(cfg.rules_path.empty()
                                  ? default_rules_text()
                                  : read_file(cfg.rules_path));
      auto mentions = annotate_corpus(corpus, gazetteers, rules);
      emit(stats_opts.out, stats_json(corpus, mentions).dump(2) + "\n");
      return 0;
    }

    if (cmd_eval->parsed()) {
      auto pred = load_eval_file(eval_pred);
      auto gold = load_eval_file(eval_gold);
      std::vector<std::set<TypePath>> p, g;
      std::set<std::string> keys;
      for (const auto& [k, _] : pred) keys.insert(k);
      for (const auto& [k, _] : gold) keys.insert(k);
      for (const auto& k : keys) {
        auto pi = pred.find(k);
        auto gi = gold.find(k);
        p.push_back(pi == pred.end() ? std::set<TypePath>{} : pi->second);
        g.push_back(gi == gold.end() ? std::set<TypePath>{} : gi->second);
      }
      EvalResult res = evaluate(p, g);
      nlohmann::json out = {{"macro_f1", res.macro_f1},
                            {"micro_f1", res.micro_f1},
                            {"mentions", keys.size()}};
      emit(eval_opts.out, out.dump(2) + "\n");
      return 0;
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
