#pragma once

#include <memory>
#include <string>

#include "mtseq/models.hpp"
#include "mtseq/vocab.hpp"

namespace mtseq {

struct VocabSet {
  Vocabulary source;
  Vocabulary target1;
  Vocabulary target2;
};

struct LoadedModel {
  std::unique_ptr<models::Model> model;
  models::ScoreConfig score;
  VocabSet vocab;
};

inline constexpr int kCheckpointVersion = 1;

// JSON container with architecture, score settings, vocabularies and every
// named parameter tensor. Written to a temporary file and renamed into place.
void save_checkpoint(const std::string& path, const models::Model& model,
                     const models::ScoreConfig& score, const VocabSet& vocab);
LoadedModel load_checkpoint(const std::string& path);

// Copies parameter values between two models of identical configuration.
void copy_parameters(const models::Model& from, models::Model& to);

}  // namespace mtseq
