#include "mtseq/checkpoint.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "mtseq/errors.hpp"

namespace mtseq {

using nlohmann::json;

namespace {

json model_to_json(const models::ModelConfig& c) {
  return {
      {"architecture", models::to_string(c.arch.kind)},
      {"reconstruction", c.arch.reconstruction},
      {"source", models::to_string(c.source)},
      {"source_vocab", c.source_vocab},
      {"target1_vocab", c.target1_vocab},
      {"target2_vocab", c.target2_vocab},
      {"source_embed", c.source_embed},
      {"target1_embed", c.target1_embed},
      {"target2_embed", c.target2_embed},
      {"encoder_hidden", c.encoder_hidden},
      {"encoder_layers", c.encoder_layers},
      {"speech",
       {{"input_dim", c.speech.input_dim},
        {"layer1_hidden", c.speech.layer1_hidden},
        {"layer2_hidden", c.speech.layer2_hidden},
        {"layer3_hidden", c.speech.layer3_hidden},
        {"stride", c.speech.stride}}},
      {"decoder_hidden", c.decoder_hidden},
      {"decoder_layers", c.decoder_layers},
      {"attention_dim", c.attention_dim},
      {"attention_temperature", c.attention_temperature},
  };
}

models::ModelConfig model_from_json(const json& j) {
  models::ModelConfig c;
  c.arch.kind = models::parse_architecture(j.at("architecture").get<std::string>());
  c.arch.reconstruction = j.at("reconstruction").get<bool>();
  c.source = models::parse_source_kind(j.at("source").get<std::string>());
  c.source_vocab = j.at("source_vocab");
  c.target1_vocab = j.at("target1_vocab");
  c.target2_vocab = j.at("target2_vocab");
  c.source_embed = j.at("source_embed");
  c.target1_embed = j.at("target1_embed");
  c.target2_embed = j.at("target2_embed");
  c.encoder_hidden = j.at("encoder_hidden");
  c.encoder_layers = j.at("encoder_layers");
  const auto& s = j.at("speech");
  c.speech.input_dim = s.at("input_dim");
  c.speech.layer1_hidden = s.at("layer1_hidden");
  c.speech.layer2_hidden = s.at("layer2_hidden");
  c.speech.layer3_hidden = s.at("layer3_hidden");
  c.speech.stride = s.at("stride");
  c.decoder_hidden = j.at("decoder_hidden");
  c.decoder_layers = j.at("decoder_layers");
  c.attention_dim = j.at("attention_dim");
  c.attention_temperature = j.at("attention_temperature");
  return c;
}

}  // namespace

void save_checkpoint(const std::string& path, const models::Model& model,
                     const models::ScoreConfig& score, const VocabSet& vocab) {
  json params = json::array();
  for (const auto& e : model.parameters().entries()) {
    params.push_back({{"name", e.name},
                      {"shape", e.tensor.shape()},
                      {"values", std::vector<double>(e.tensor.values().begin(), e.tensor.values().end())}});
  }
  const json doc = {
      {"format", "mtseq-checkpoint"},
      {"version", kCheckpointVersion},
      {"model", model_to_json(model.config())},
      {"score",
       {{"lambda", score.lambda}, {"trans_weight", score.trans_weight}, {"inv_weight", score.inv_weight}}},
      {"vocab",
       {{"source", vocab.source.symbols()},
        {"target1", vocab.target1.symbols()},
        {"target2", vocab.target2.symbols()}}},
      {"parameters", params},
  };
  const std::string tmp = path + ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw std::runtime_error("cannot write checkpoint " + tmp);
    os << doc.dump();
    if (!os) throw std::runtime_error("failed writing checkpoint " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

LoadedModel load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot read checkpoint " + path);
  json doc;
  try {
    doc = json::parse(is);
  } catch (const json::parse_error& e) {
    throw FormatError(path + ": " + e.what());
  }
  if (doc.value("format", "") != "mtseq-checkpoint")
    throw FormatError(path + ": not an mtseq checkpoint");
  if (doc.value("version", 0) != kCheckpointVersion)
    throw FormatError(path + ": unsupported checkpoint version " +
                      std::to_string(doc.value("version", 0)));
  LoadedModel out;
  const auto cfg = model_from_json(doc.at("model"));
  out.model = std::make_unique<models::Model>(cfg, 0);
  const auto& sc = doc.at("score");
  out.score = {sc.at("lambda"), sc.at("trans_weight"), sc.at("inv_weight")};
  const auto& v = doc.at("vocab");
  out.vocab.source = Vocabulary::from_symbols(v.at("source"));
  out.vocab.target1 = Vocabulary::from_symbols(v.at("target1"));
  out.vocab.target2 = Vocabulary::from_symbols(v.at("target2"));
  std::size_t loaded = 0;
  for (const auto& p : doc.at("parameters")) {
    const std::string name = p.at("name");
    auto& t = out.model->parameters().get(name);
    const Shape shape = p.at("shape").get<Shape>();
    if (shape != t.shape())
      throw FormatError(path + ": parameter " + name + " has shape " + shape_str(shape) +
                        ", model expects " + shape_str(t.shape()));
    const auto values = p.at("values").get<std::vector<double>>();
    if (values.size() != t.size()) throw FormatError(path + ": parameter " + name + " truncated");
    std::copy(values.begin(), values.end(), t.values().begin());
    ++loaded;
  }
  if (loaded != out.model->parameters().entries().size())
    throw FormatError(path + ": checkpoint is missing parameters");
  return out;
}

void copy_parameters(const models::Model& from, models::Model& to) {
  const auto& src = from.parameters().entries();
  auto& dst = to.parameters().entries();
  if (src.size() != dst.size()) throw ConfigError("copy_parameters: models differ in structure");
  for (std::size_t i = 0; i < src.size(); ++i) {
    if (src[i].name != dst[i].name || src[i].tensor.shape() != dst[i].tensor.shape())
      throw ConfigError("copy_parameters: parameter mismatch at " + src[i].name);
    std::copy(src[i].tensor.values().begin(), src[i].tensor.values().end(),
              dst[i].tensor.values().begin());
  }
}

}  // namespace mtseq
