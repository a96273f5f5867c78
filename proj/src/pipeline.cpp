#include "ontopop/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>

#include "ontopop/util.hpp"

namespace ontopop {

namespace fs = std::filesystem;

std::vector<std::string> token_coarse_tags(
    const Sentence& sentence, const std::vector<EntityMention>& mentions) {
  std::vector<std::string> tags(sentence.tokens.size(), "NONE");
  for (const auto& m : mentions) {
    if (m.doc_id != sentence.doc_id || m.sent_index != sentence.sent_index)
      continue;
    if (!m.coarse_label) continue;
    for (size_t t = m.first_tok; t <= m.last_tok && t < tags.size(); ++t)
      tags[t] = m.coarse_label->str();
  }
  return tags;
}

std::vector<EntityMention> annotate_corpus(
    const Corpus& corpus, const std::vector<Gazetteer>& gazetteers,
    const std::vector<PatternRule>& rules) {
  std::vector<EntityMention> out;
  for (const auto& doc_sentences : corpus.sentences) {
    for (const auto& sentence : doc_sentences) {
      auto gaz = gazetteer_annotate(sentence, gazetteers);
      auto pat = pattern_annotate(sentence, rules);
      std::vector<bool> taken(sentence.tokens.size(), false);
      for (const auto& m : gaz)
        for (size_t t = m.first_tok; t <= m.last_tok; ++t) taken[t] = true;
      for (auto& m : gaz) out.push_back(std::move(m));
      for (auto& m : pat) {
        bool overlap = false;
        for (size_t t = m.first_tok; t <= m.last_tok; ++t)
          if (taken[t]) {
            overlap = true;
            break;
          }
        if (!overlap) out.push_back(std::move(m));
      }
    }
  }
  std::sort(out.begin(), out.end(),
            [](const EntityMention& a, const EntityMention& b) {
              return std::tie(a.doc_id, a.sent_index, a.first_tok) <
                     std::tie(b.doc_id, b.sent_index, b.first_tok);
            });
  return out;
}

namespace {

// doc_id -> index into corpus.sentences
std::map<std::string, size_t> doc_index(const Corpus& corpus) {
  std::map<std::string, size_t> out;
  for (size_t i = 0; i < corpus.docs.size(); ++i)
    out[corpus.docs[i].doc_id] = i;
  return out;
}

std::vector<EntityMention> sentence_mentions(
    const std::vector<EntityMention>& mentions, const std::string& doc_id,
    size_t sent_index) {
  std::vector<EntityMention> out;
  for (const auto& m : mentions)
    if (m.doc_id == doc_id && m.sent_index == sent_index) out.push_back(m);
  return out;
}

std::string mention_ref(const EntityMention& m) {
  return m.doc_id + ":" + std::to_string(m.sent_index) + ":" +
         std::to_string(m.first_tok) + "-" + std::to_string(m.last_tok);
}

}  // namespace

std::vector<RelationCandidate> corpus_relation_candidates(
    const Corpus& corpus, const std::vector<EntityMention>& mentions,
    const std::vector<LabelingFunction>& lfs) {
  std::vector<RelationCandidate> out;
  for (const auto& doc_sentences : corpus.sentences) {
    for (const auto& sentence : doc_sentences) {
      auto local = sentence_mentions(mentions, sentence.doc_id,
                                     sentence.sent_index);
      for (auto& c : apply_labeling_functions(sentence, local, lfs))
        out.push_back(std::move(c));
    }
  }
  return out;
}

std::vector<TrainingExample> bootstrap_examples(
    const Corpus& corpus, const std::vector<EntityMention>& mentions,
    const OntologySchema& schema, int window) {
  std::vector<TrainingExample> out;
  auto docs = doc_index(corpus);
  for (const auto& m : mentions) {
    if (!m.coarse_label) continue;
    auto it = docs.find(m.doc_id);
    if (it == docs.end()) continue;
    const auto& sentences = corpus.sentences[it->second];
    if (m.sent_index >= sentences.size()) continue;
    const Sentence& sentence = sentences[m.sent_index];
    auto local =
        sentence_mentions(mentions, sentence.doc_id, sentence.sent_index);
    TrainingExample ex;
    ex.ctx = make_context(sentence, m.first_tok, m.last_tok, window,
                          token_coarse_tags(sentence, local));
    ex.labels = expand_labels({*m.coarse_label}, schema);
    out.push_back(std::move(ex));
  }
  return out;
}

std::vector<EntityMention> classify_mentions(
    const ClassifierModel& model, const Corpus& corpus,
    const std::vector<EntityMention>& mentions, const OntologySchema& schema,
    double threshold) {
  std::vector<EntityMention> out;
  auto docs = doc_index(corpus);
  for (const auto& m : mentions) {
    EntityMention typed = m;
    auto it = docs.find(m.doc_id);
    if (it != docs.end() && m.sent_index < corpus.sentences[it->second].size()) {
      const Sentence& sentence = corpus.sentences[it->second][m.sent_index];
      auto local =
          sentence_mentions(mentions, sentence.doc_id, sentence.sent_index);
      MentionContext ctx =
          make_context(sentence, m.first_tok, m.last_tok,
                       model.config().window, token_coarse_tags(sentence, local));
      typed.fine_labels = model.decode(model.classify(ctx), schema, threshold);
      typed.provenance = MentionProvenance::classifier;
    }
    out.push_back(std::move(typed));
  }
  return out;
}

std::string entity_key(const std::string& surface) {
  return fold_case(normalize_ws(surface));
}

std::vector<Triple> candidates_to_triples(
    const std::vector<RelationCandidate>& candidates, const Corpus& corpus) {
  std::vector<Triple> out;
  auto docs = doc_index(corpus);
  for (const auto& c : candidates) {
    Triple t;
    t.head = entity_key(c.head.surface);
    t.rel = c.relation;
    t.tail = entity_key(c.tail.surface);
    auto it = docs.find(c.head.doc_id);
    if (it != docs.end() &&
        c.head.sent_index < corpus.sentences[it->second].size()) {
      for (const auto& tok :
           corpus.sentences[it->second][c.head.sent_index].tokens)
        t.sentence.push_back(tok.text);
    }
    out.push_back(std::move(t));
  }
  return out;
}

nlohmann::json stats_json(const Corpus& corpus,
                          const std::vector<EntityMention>& mentions) {
  std::vector<MentionLabel> records;
  for (const auto& m : mentions) {
    MentionLabel rec;
    rec.surface = m.surface;
    if (m.coarse_label) rec.labels.push_back(m.coarse_label->str());
    for (const auto& l : m.fine_labels) rec.labels.push_back(l.str());
    records.push_back(std::move(rec));
  }
  CorpusStats stats = corpus_stats(corpus, records);
  return nlohmann::json{{"documents", stats.documents},
                        {"sentences", stats.sentences},
                        {"entity_mentions", stats.entity_mentions},
                        {"unique_entity_mentions", stats.unique_entity_mentions},
                        {"unique_entity_types", stats.unique_entity_types}};
}

namespace {

struct StageTimer {
  std::chrono::steady_clock::time_point start =
      std::chrono::steady_clock::now();
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                         start)
        .count();
  }
};

// Attach each non-person mention as an attribute of the nearest person
// mention in the same sentence (token distance; earlier person wins ties).
// Person identity comes from the coarse annotator labels; the parallel
// `typed` list (classifier output) refines the attribute type.
size_t attach_attributes(OntologyGraph& graph,
                         const std::vector<EntityMention>& annotated,
                         const std::vector<EntityMention>& typed) {
  size_t attached = 0;
  std::map<std::pair<std::string, size_t>, std::vector<size_t>> by_sentence;
  for (size_t i = 0; i < annotated.size(); ++i)
    by_sentence[{annotated[i].doc_id, annotated[i].sent_index}].push_back(i);

  for (const auto& [key, indices] : by_sentence) {
    std::vector<size_t> persons, others;
    for (size_t i : indices)
      (annotated[i].is_person() ? persons : others).push_back(i);
    if (persons.empty()) continue;
    for (size_t ai : others) {
      const EntityMention& attr = annotated[ai];
      auto label =
          ai < typed.size() ? primary_label(typed[ai]) : primary_label(attr);
      if (!label) label = primary_label(attr);
      if (!label) continue;
      const EntityMention* best = nullptr;
      size_t best_dist = std::numeric_limits<size_t>::max();
      for (size_t pi : persons) {
        const EntityMention* p = &annotated[pi];
        size_t dist;
        if (p->last_tok < attr.first_tok)
          dist = attr.first_tok - p->last_tok;
        else if (attr.last_tok < p->first_tok)
          dist = p->first_tok - attr.last_tok;
        else
          dist = 0;
        if (dist < best_dist ||
            (dist == best_dist && best != nullptr &&
             p->first_tok < best->first_tok)) {
          best_dist = dist;
          best = p;
        }
      }
      uint32_t node = graph.resolve_person(*best);
      graph.attach_attribute(node, *label, normalize_ws(attr.surface),
                             attr.provenance, mention_ref(attr));
      ++attached;
    }
  }
  return attached;
}

}  // namespace

nlohmann::json run_pipeline(const PipelineConfig& config) {
  config.validate_for_run();
  fs::create_directories(config.out_dir);
  auto out_path = [&](const std::string& name) {
    return (fs::path(config.out_dir) / name).string();
  };

  nlohmann::json stages = nlohmann::json::array();
  auto record = [&](const std::string& name, const StageTimer& timer,
                    nlohmann::json counts) {
    stages.push_back({{"name", name},
                      {"seconds", timer.seconds()},
                      {"counts", std::move(counts)}});
  };

  // ingest
  StageTimer t_ingest;
  Corpus corpus = load_corpus_dir(config.corpus_dir);
  {
    std::string jsonl;
    size_t n_sentences = 0, n_tokens = 0;
    for (const auto& doc_sentences : corpus.sentences) {
      jsonl += sentences_to_jsonl(doc_sentences);
      n_sentences += doc_sentences.size();
      for (const auto& s : doc_sentences) n_tokens += s.tokens.size();
    }
    write_file(out_path("sentences.jsonl"), jsonl);
    record("ingest", t_ingest,
           {{"documents", corpus.docs.size()},
            {"sentences", n_sentences},
            {"tokens", n_tokens}});
  }

  // annotate
  StageTimer t_annotate;
  auto schema = std::make_shared<const OntologySchema>(
      OntologySchema::load(read_file(config.schema_path)));
  std::vector<Gazetteer> gazetteers =
      config.gazetteers_path.empty()
          ? std::vector<Gazetteer>{}
          : load_gazetteers(read_file(config.gazetteers_path));
  std::vector<PatternRule> rules = load_rules(
      config.rules_path.empty() ? default_rules_text()
                                : read_file(config.rules_path));
  std::vector<LabelingFunction> lfs = load_labeling_functions(
      config.lfs_path.empty() ? default_labeling_functions_text()
                              : read_file(config.lfs_path),
      *schema);

  std::vector<EntityMention> mentions =
      annotate_corpus(corpus, gazetteers, rules);
  std::vector<RelationCandidate> candidates =
      corpus_relation_candidates(corpus, mentions, lfs);
  write_file(out_path("mentions.jsonl"), mentions_to_jsonl(mentions));
  write_file(out_path("candidates.tsv"), candidates_to_tsv(candidates));
  record("annotate", t_annotate,
         {{"mentions", mentions.size()}, {"candidates", candidates.size()}});

  // classifier: train on weak supervision unless a checkpoint is given
  StageTimer t_classifier;
  std::optional<ClassifierModel> classifier;
  nlohmann::json classifier_counts = {{"examples", 0}, {"trained", false}};
  if (!config.classifier_model_path.empty()) {
    classifier = ClassifierModel::load(config.classifier_model_path);
    classifier_counts["trained"] = false;
    classifier_counts["loaded"] = true;
  } else if (config.train_models) {
    auto examples = bootstrap_examples(corpus, mentions, *schema,
                                       config.classifier.window);
    classifier_counts["examples"] = examples.size();
    if (!examples.empty()) {
      ClassifierConfig ccfg = config.classifier;
      ccfg.seed = derive_seed(config.seed, "train-classifier");
      TrainResult res = train_classifier(examples, *schema, ccfg);
      classifier = std::move(res.model);
      classifier->save(out_path("classifier.model"));
      classifier_counts["trained"] = true;
      classifier_counts["final_loss"] =
          res.epoch_loss.empty() ? 0.0 : res.epoch_loss.back();
    }
  }
  record("train-classifier", t_classifier, classifier_counts);

  // classify
  StageTimer t_classify;
  std::vector<EntityMention> typed = mentions;
  if (classifier) {
    typed = classify_mentions(*classifier, corpus, mentions, *schema,
                              config.decode_threshold);
    write_file(out_path("typed_mentions.jsonl"), mentions_to_jsonl(typed));
  }
  record("classify", t_classify, {{"mentions", typed.size()}});

  // relation embedding space
  StageTimer t_relemb;
  std::optional<TripleEmbeddingSpace> relspace;
  std::vector<Triple> triples = candidates_to_triples(candidates, corpus);
  write_file(out_path("triples.tsv"), triples_to_tsv(triples));
  if (!config.relemb_model_path.empty()) {
    relspace = TripleEmbeddingSpace::load(config.relemb_model_path);
  } else if (config.train_models && !triples.empty()) {
    RelEmbedConfig rcfg = config.relemb;
    rcfg.seed = derive_seed(config.seed, "train-relemb");
    relspace = train_embeddings(triples, *schema, rcfg);
    relspace->save(out_path("relemb.model"));
  }
  record("train-relemb", t_relemb,
         {{"triples", triples.size()}, {"trained", relspace.has_value()}});

  // extract relations (labeling-function candidates pass through)
  StageTimer t_extract;
  {
    std::string tsv;
    for (const auto& c : candidates) {
      tsv += entity_key(c.head.surface) + "\t" + c.relation + "\t" +
             entity_key(c.tail.surface) + "\t1\tlabeling_function\n";
    }
    write_file(out_path("relations.tsv"), tsv);
  }
  record("extract-relations", t_extract, {{"relations", candidates.size()}});

  // populate
  StageTimer t_populate;
  OntologyGraph graph(schema);
  std::ofstream journal(out_path("graph.journal"), std::ios::binary);
  graph.set_journal(&journal);
  // Person identity is driven by the high-precision coarse annotators, not
  // by classifier output.
  for (const auto& m : mentions) {
    if (!m.is_person()) continue;
    graph.resolve_person(m);
  }
  size_t persons = graph.nodes().size();
  size_t attributes = attach_attributes(graph, mentions, typed);
  size_t lf_edges = 0;
  for (const auto& c : candidates) {
    RelationEdge e;
    e.head = graph.resolve_person_surface(c.head.surface);
    e.tail = graph.resolve_person_surface(c.tail.surface);
    e.relation = c.relation;
    e.provenance = EdgeProvenance::labeling_function;
    e.confidence = 1.0;
    if (graph.add_relation(e)) ++lf_edges;
  }
  record("populate", t_populate,
         {{"persons", persons},
          {"attributes", attributes},
          {"lf_edges", lf_edges}});

  // link prediction over the person graph
  StageTimer t_link;
  size_t predicted = 0;
  nlohmann::json link_counts;
  if (graph.edges().size() >= 1 && graph.nodes().size() >= 3 && relspace) {
    PersonGraph pgraph;
    for (const auto& node : graph.nodes()) pgraph.add_node(node.canonical_name);
    for (const auto& e : graph.edges())
      pgraph.add_edge(static_cast<int>(e.head), static_cast<int>(e.tail),
                      e.relation);

    LinkPredConfig lcfg = config.link;
    lcfg.seed = derive_seed(config.seed, "train-linkpred");
    EdgeSplit split = split_edges(pgraph, 1.0, 0.0, lcfg.seed);
    LinkTrainResult trained =
        train_link_predictor(pgraph, split, config.link_model, lcfg);

    std::string fallback_rel;
    {
      std::map<std::string, size_t> freq;
      for (const auto& e : graph.edges()) freq[e.relation]++;
      size_t best = 0;
      for (const auto& [rel, count] : freq)
        if (count > best) {
          best = count;
          fallback_rel = rel;
        }
    }

    for (const auto& pe :
         augment_graph(pgraph, trained.model, config.link_threshold)) {
      std::string head_key = entity_key(pgraph.names[pe.u]);
      std::string tail_key = entity_key(pgraph.names[pe.v]);
      std::string rel = fallback_rel;
      if (relspace->entity_id(head_key) >= 0 &&
          relspace->entity_id(tail_key) >= 0) {
        auto ranked = relspace->predict_relation(head_key, tail_key, nullptr);
        if (!ranked.empty()) rel = ranked.front().first;
      }
      if (rel.empty()) continue;
      RelationEdge e;
      e.head = static_cast<uint32_t>(pe.u);
      e.tail = static_cast<uint32_t>(pe.v);
      e.relation = rel;
      e.provenance = EdgeProvenance::predicted;
      e.confidence = pe.score;
      if (graph.add_relation(e)) ++predicted;
    }
    link_counts = {{"model", std::string(link_model_name(config.link_model))},
                   {"predicted_edges", predicted}};
  } else {
    link_counts = {{"skipped", true}, {"predicted_edges", 0}};
  }
  record("link-predict", t_link, link_counts);

  // export
  StageTimer t_export;
  write_file(out_path("graph.nt"), graph.export_ntriples());
  write_file(out_path("graph_edges.tsv"), graph.export_edgelist());
  write_file(out_path("stats.json"), stats_json(corpus, typed).dump(2) + "\n");
  record("export", t_export,
         {{"nodes", graph.nodes().size()}, {"edges", graph.edges().size()}});

  nlohmann::json report = {
      {"version", 1},
      {"seed", config.seed},
      {"stages", stages},
      {"totals",
       {{"documents", corpus.docs.size()},
        {"mentions", mentions.size()},
        {"persons", persons},
        {"lf_edges", lf_edges},
        {"predicted_edges", predicted},
        {"nodes", graph.nodes().size()},
        {"edges", graph.edges().size()}}}};
  write_file(out_path("report.json"), report.dump(2) + "\n");
  return report;
}

}  // namespace ontopop
