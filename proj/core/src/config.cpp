#include "mvkp/config.hpp"

#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "mvkp/error.hpp"

namespace mvkp {
namespace {

namespace pt = boost::property_tree;

// Visits every configurable field under its "section.key" name.
template <typename Config, typename Visitor>
void visit_fields(Config& c, Visitor&& visit) {
  visit("experiment.seed", c.seed);

  visit("scene.views", c.scene.views);
  visit("scene.frames", c.scene.frames);
  visit("scene.channels", c.scene.channels);
  visit("scene.ring_radius", c.scene.ring_radius);
  visit("scene.camera_height", c.scene.camera_height);
  visit("scene.height_jitter", c.scene.height_jitter);
  visit("scene.focal", c.scene.focal);
  visit("scene.torso_radius", c.scene.torso_radius);
  visit("scene.limb_length", c.scene.limb_length);
  visit("scene.sway_amplitude", c.scene.sway_amplitude);
  visit("scene.limb_amplitude", c.scene.limb_amplitude);
  visit("scene.static_boxes", c.scene.static_boxes);
  visit("scene.blob_sigma", c.scene.blob_sigma);
  visit("scene.pixel_noise", c.scene.pixel_noise);
  visit("scene.drift", c.scene.drift);
  visit("scene.drift_hue", c.scene.drift_hue);
  visit("scene.clutter", c.scene.clutter);
  visit("scene.clutter_size", c.scene.clutter_size);
  visit("scene.sigma_gt", c.scene.sigma_gt);
  visit("scene.flow_sigma", c.scene.flow_sigma);
  visit("scene.flow_background", c.scene.flow_background);

  visit("loss.lambda_c", c.loss.lambda_c);
  visit("loss.lambda_t", c.loss.lambda_t);
  visit("loss.lambda_v", c.loss.lambda_v);
  visit("loss.eps_m", c.loss.eps_m);
  visit("loss.eps_M", c.loss.eps_M);
  visit("loss.eps_c", c.loss.eps_c);
  visit("loss.sigma_gt", c.loss.sigma_gt);
  visit("loss.symmetric_temporal", c.temporal.symmetric);
  visit("loss.freeze_warped", c.temporal.freeze_warped);

  visit("label.fraction", c.label.fraction);
  visit("label.views", c.label.views);

  visit("bootstrap.ransac_threshold", c.augment.ransac_threshold);
  visit("bootstrap.ransac_iterations", c.augment.ransac_iterations);
  visit("bootstrap.epochs", c.pretrain.epochs);
  visit("bootstrap.batch_size", c.pretrain.batch_size);
  visit("bootstrap.learning_rate", c.pretrain.learning_rate);

  visit("train.steps", c.train.steps);
  visit("train.learning_rate", c.train.learning_rate);
  visit("train.labeled_batch", c.train.labeled_batch);
  visit("train.unlabeled_batch", c.train.unlabeled_batch);
  visit("train.max_gap", c.train.max_gap);
  visit("train.flow_noise", c.train.flow_noise);
  visit("train.checkpoint_every", c.train.checkpoint_every);

  visit("eval.threshold", c.eval.threshold);
  visit("eval.head_a", c.eval.head_a);
  visit("eval.head_b", c.eval.head_b);
  visit("eval.unseen_seed_offset", c.eval.unseen_seed_offset);
}

template <typename T>
void assign(const std::string& key, const std::string& text, T& field) {
  std::istringstream in(text);
  if constexpr (std::is_same_v<T, bool>) {
    std::string word;
    in >> word;
    if (word == "true" || word == "1") {
      field = true;
    } else if (word == "false" || word == "0") {
      field = false;
    } else {
      fail(ErrorCode::kConfigInvalid, "key " + key + " expects true or false");
    }
    return;
  } else {
    T value{};
    in >> value;
    std::string rest;
    if (in.fail() || (in >> rest)) {
      fail(ErrorCode::kConfigInvalid, "key " + key + " has malformed value '" + text + "'");
    }
    field = value;
  }
}

ExperimentConfig from_tree(const pt::ptree& tree) {
  ExperimentConfig config;
  std::map<std::string, std::function<void(const std::string&)>> setters;
  visit_fields(config, [&](const char* key, auto& field) {
    setters[key] = [&field, key](const std::string& text) { assign(key, text, field); };
  });
  for (const auto& [section, entries] : tree) {
    if (entries.empty()) {
      fail(ErrorCode::kConfigInvalid, "key outside a section: " + section);
    }
    for (const auto& [key, value] : entries) {
      const std::string name = section + "." + key;
      auto it = setters.find(name);
      if (it == setters.end()) fail(ErrorCode::kConfigInvalid, "unknown config key " + name);
      it->second(value.get_value<std::string>());
    }
  }
  config.validate();
  return config;
}

}  // namespace

void ExperimentConfig::validate() const {
  scene.validate();
  loss.validate();
  require(label.fraction > 0.0 && label.fraction <= 1.0, ErrorCode::kConfigInvalid,
          "label fraction must lie in (0, 1]");
  require(label.views >= 2 && label.views <= scene.views, ErrorCode::kConfigInvalid,
          "label views must be between 2 and the number of cameras");
  require(augment.ransac_threshold > 0.0 && augment.ransac_iterations > 0,
          ErrorCode::kConfigInvalid, "bad RANSAC settings");
  require(pretrain.epochs >= 0 && pretrain.batch_size > 0 && pretrain.learning_rate > 0.0,
          ErrorCode::kConfigInvalid, "bad bootstrap schedule");
  require(train.steps >= 0 && train.learning_rate > 0.0 && train.labeled_batch >= 0 &&
              train.unlabeled_batch >= 0 && train.max_gap >= 1 && train.flow_noise >= 0.0 &&
              train.checkpoint_every >= 0,
          ErrorCode::kConfigInvalid, "bad training schedule");
  require(eval.threshold > 0.0, ErrorCode::kConfigInvalid, "evaluation threshold must be positive");
  require(eval.head_a >= 0 && eval.head_b >= 0 && eval.head_a < scene.channels - 1 &&
              eval.head_b < scene.channels - 1 && eval.head_a != eval.head_b,
          ErrorCode::kConfigInvalid, "head channels must be two distinct keypoint channels");
}

ExperimentConfig parse_config(const std::string& text) {
  std::istringstream in(text);
  pt::ptree tree;
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    fail(ErrorCode::kConfigInvalid, e.what());
  }
  return from_tree(tree);
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::kIo, "cannot open config " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_config(buffer.str());
}

void save_config(const std::filesystem::path& path, const ExperimentConfig& config) {
  std::map<std::string, std::vector<std::pair<std::string, std::string>>> sections;
  std::vector<std::string> order;
  ExperimentConfig copy = config;
  visit_fields(copy, [&](const std::string& key, const auto& field) {
    const auto dot = key.find('.');
    const std::string section = key.substr(0, dot);
    std::ostringstream value;
    value.precision(17);
    if constexpr (std::is_same_v<std::decay_t<decltype(field)>, bool>) {
      value << (field ? "true" : "false");
    } else {
      value << field;
    }
    if (!sections.count(section)) order.push_back(section);
    sections[section].emplace_back(key.substr(dot + 1), value.str());
  });
  std::ofstream out(path);
  if (!out) fail(ErrorCode::kIo, "cannot write config " + path.string());
  for (const std::string& section : order) {
    out << "[" << section << "]\n";
    for (const auto& [key, value] : sections[section]) out << key << " = " << value << "\n";
    out << "\n";
  }
}

}  // namespace mvkp
