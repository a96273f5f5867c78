#include "ontopop/config.hpp"

#include <filesystem>

#include "ontopop/util.hpp"

namespace ontopop {

PipelineConfig PipelineConfig::parse(std::string_view text) {
  PipelineConfig cfg;
  int lineno = 0;
  for (const auto& raw : split_lines(text)) {
    ++lineno;
    std::string line = raw;
    if (auto hash = line.find('#'); hash != std::string::npos)
      line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config line " + std::to_string(lineno) +
                        ": expected 'key = value'");
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (key.empty() || value.empty())
      throw ConfigError("config line " + std::to_string(lineno) +
                        ": empty key or value");

    auto to_int = [&](const std::string& v) {
      try {
        return std::stoi(v);
      } catch (const std::exception&) {
        throw ConfigError("config line " + std::to_string(lineno) +
                          ": expected integer, got '" + v + "'");
      }
    };
    auto to_double = [&](const std::string& v) {
      try {
        return std::stod(v);
      } catch (const std::exception&) {
        throw ConfigError("config line " + std::to_string(lineno) +
                          ": expected number, got '" + v + "'");
      }
    };
    auto to_bool = [&](const std::string& v) {
      if (v == "true" || v == "1") return true;
      if (v == "false" || v == "0") return false;
      throw ConfigError("config line " + std::to_string(lineno) +
                        ": expected true/false, got '" + v + "'");
    };

    if (key == "corpus_dir")
      cfg.corpus_dir = value;
    else if (key == "schema")
      cfg.schema_path = value;
    else if (key == "gazetteers")
      cfg.gazetteers_path = value;
    else if (key == "rules")
      cfg.rules_path = value;
    else if (key == "lfs")
      cfg.lfs_path = value;
    else if (key == "out_dir")
      cfg.out_dir = value;
    else if (key == "classifier_model")
      cfg.classifier_model_path = value;
    else if (key == "relemb_model")
      cfg.relemb_model_path = value;
    else if (key == "seed")
      cfg.seed = static_cast<uint64_t>(std::stoull(value));
    else if (key == "train_models")
      cfg.train_models = to_bool(value);
    else if (key == "classifier_encoder")
      cfg.classifier.encoder = encoder_from_name(value);
    else if (key == "classifier_use_features")
      cfg.classifier.use_features = to_bool(value);
    else if (key == "classifier_epochs")
      cfg.classifier.epochs = to_int(value);
    else if (key == "classifier_lr")
      cfg.classifier.lr = to_double(value);
    else if (key == "classifier_batch")
      cfg.classifier.batch_size = to_int(value);
    else if (key == "classifier_d_w")
      cfg.classifier.d_w = to_int(value);
    else if (key == "classifier_d_f")
      cfg.classifier.d_f = to_int(value);
    else if (key == "classifier_D")
      cfg.classifier.D = to_int(value);
    else if (key == "classifier_hidden")
      cfg.classifier.hidden = to_int(value);
    else if (key == "classifier_window")
      cfg.classifier.window = to_int(value);
    else if (key == "embeddings")
      cfg.classifier.pretrained_embeddings_path = value;
    else if (key == "relemb_k")
      cfg.relemb.k = to_int(value);
    else if (key == "relemb_d_s")
      cfg.relemb.d_s = to_int(value);
    else if (key == "relemb_epochs")
      cfg.relemb.epochs = to_int(value);
    else if (key == "relemb_lr")
      cfg.relemb.lr = to_double(value);
    else if (key == "relemb_gamma")
      cfg.relemb.gamma = to_double(value);
    else if (key == "lambda")
      cfg.relemb.lambda = to_double(value);
    else if (key == "link_model")
      cfg.link_model = link_model_from_name(value);
    else if (key == "link_hidden")
      cfg.link.hidden = to_int(value);
    else if (key == "link_emb_dim")
      cfg.link.emb_dim = to_int(value);
    else if (key == "link_epochs")
      cfg.link.epochs = to_int(value);
    else if (key == "link_lr")
      cfg.link.lr = to_double(value);
    else if (key == "decode_threshold")
      cfg.decode_threshold = to_double(value);
    else if (key == "link_threshold")
      cfg.link_threshold = to_double(value);
    else
      throw ConfigError("config line " + std::to_string(lineno) +
                        ": unknown key '" + key + "'");
  }
  return cfg;
}

PipelineConfig PipelineConfig::load(const std::string& path) {
  try {
    return parse(read_file(path));
  } catch (const IoError& e) {
    throw ConfigError(e.what());
  }
}

void PipelineConfig::validate_for_run() const {
  namespace fs = std::filesystem;
  auto require_dir = [](const std::string& p, const char* what) {
    if (p.empty())
      throw ConfigError(std::string(what) + " not set in config");
    if (!fs::is_directory(p))
      throw ConfigError(std::string(what) + " does not exist: " + p);
  };
  auto require_file_if_set = [](const std::string& p, const char* what) {
    if (!p.empty() && !fs::is_regular_file(p))
      throw ConfigError(std::string(what) + " does not exist: " + p);
  };
  require_dir(corpus_dir, "corpus_dir");
  if (schema_path.empty()) throw ConfigError("schema not set in config");
  require_file_if_set(schema_path, "schema");
  require_file_if_set(gazetteers_path, "gazetteers");
  require_file_if_set(rules_path, "rules");
  require_file_if_set(lfs_path, "lfs");
  require_file_if_set(classifier_model_path, "classifier_model");
  require_file_if_set(relemb_model_path, "relemb_model");
  require_file_if_set(classifier.pretrained_embeddings_path, "embeddings");
}

}  // namespace ontopop
