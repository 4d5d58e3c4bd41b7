#include "voyagecast/checkpoint.hpp"

#include <fstream>

#include "json.hpp"

#include "voyagecast/error.hpp"

namespace voyagecast {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

ordered_json matrix_json(const model::Matrix& m) {
  ordered_json j;
  j["rows"] = m.rows();
  j["cols"] = m.cols();
  j["data"] = std::vector<double>(m.data(), m.data() + m.size());
  return j;
}

model::Matrix matrix_from(const json& j, const std::string& what) {
  const auto rows = j.at("rows").get<tensor::Index>();
  const auto cols = j.at("cols").get<tensor::Index>();
  const auto data = j.at("data").get<std::vector<double>>();
  if (rows < 0 || cols < 0 || static_cast<tensor::Index>(data.size()) != rows * cols) {
    throw ValidationError("checkpoint tensor '" + what + "' has inconsistent shape");
  }
  model::Matrix m(rows, cols);
  std::copy(data.begin(), data.end(), m.data());
  return m;
}

ordered_json vocab_json(const features::Vocabulary& v) { return v.values; }

features::Vocabulary vocab_from(const json& j) {
  features::Vocabulary v;
  for (const auto& s : j) v.add(s.get<std::string>());
  return v;
}

}  // namespace

model::VocabSizes vocab_sizes(const features::FeatureStats& stats, int slots_per_day) {
  model::VocabSizes v;
  v.ports = stats.ports.size();
  v.terminals = stats.terminals.size();
  v.carriers = stats.carriers.size();
  v.slots = slots_per_day;
  return v;
}

void save_checkpoint(const std::string& path, const Checkpoint& c) {
  ordered_json j;
  j["format"] = "voyagecast-checkpoint";
  j["version"] = kCheckpointVersion;
  j["epoch"] = c.epoch;
  j["val_loss"] = c.val_loss;
  const model::ModelConfig& m = c.model;
  j["model"] = {{"d_emb", m.d_emb},       {"d_model", m.d_model}, {"n_head", m.n_head},
                {"n_block", m.n_block},   {"d_temp", m.d_temp},   {"p_att", m.p_att},
                {"p_ffn", m.p_ffn},       {"L", m.L},             {"H", m.H},
                {"beta", m.beta},         {"eta", m.eta},         {"pe_base", m.pe_base},
                {"head_dim_scaling", m.head_dim_scaling}};
  j["vocab"] = {{"ports", c.vocab.ports},         {"terminals", c.vocab.terminals},
                {"carriers", c.vocab.carriers},   {"weekdays", c.vocab.weekdays},
                {"slots", c.vocab.slots}};
  ordered_json channels = ordered_json::array();
  for (const auto& ch : c.stats.channels)
    channels.push_back({{"mean", ch.mean}, {"std", ch.std}, {"scaled", ch.scaled}});
  j["stats"] = {{"channels", channels},
                {"ports", vocab_json(c.stats.ports)},
                {"terminals", vocab_json(c.stats.terminals)},
                {"carriers", vocab_json(c.stats.carriers)}};
  ordered_json params = ordered_json::array();
  for (std::size_t i = 0; i < c.params.size(); ++i) {
    ordered_json p = matrix_json(c.params.value(i));
    p["name"] = c.params.name(i);
    params.push_back(std::move(p));
  }
  j["params"] = std::move(params);
  ordered_json m1 = ordered_json::array(), m2 = ordered_json::array();
  for (const auto& x : c.adam.m) m1.push_back(matrix_json(x));
  for (const auto& x : c.adam.v) m2.push_back(matrix_json(x));
  j["adam"] = {{"beta1", c.adam.beta1}, {"beta2", c.adam.beta2}, {"eps", c.adam.eps},
               {"step", c.adam.step},   {"m", std::move(m1)},    {"v", std::move(m2)}};

  std::ofstream out(path);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out << j.dump() << '\n';
  if (!out) throw IoError("failed writing '" + path + "'");
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open checkpoint '" + path + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ValidationError(path + ": not a checkpoint document (" + e.what() + ")");
  }
  try {
    if (j.value("format", "") != "voyagecast-checkpoint")
      throw ValidationError(path + ": missing checkpoint format tag");
    if (j.at("version").get<int>() != kCheckpointVersion)
      throw ValidationError(path + ": unsupported checkpoint version " +
                            std::to_string(j.at("version").get<int>()));
    Checkpoint c;
    c.epoch = j.at("epoch").get<int>();
    c.val_loss = j.at("val_loss").get<double>();
    const json& m = j.at("model");
    c.model.d_emb = m.at("d_emb");
    c.model.d_model = m.at("d_model");
    c.model.n_head = m.at("n_head");
    c.model.n_block = m.at("n_block");
    c.model.d_temp = m.at("d_temp");
    c.model.p_att = m.at("p_att");
    c.model.p_ffn = m.at("p_ffn");
    c.model.L = m.at("L");
    c.model.H = m.at("H");
    c.model.beta = m.at("beta");
    c.model.eta = m.at("eta");
    c.model.pe_base = m.at("pe_base");
    c.model.head_dim_scaling = m.at("head_dim_scaling");
    c.model.validate();
    const json& v = j.at("vocab");
    c.vocab.ports = v.at("ports");
    c.vocab.terminals = v.at("terminals");
    c.vocab.carriers = v.at("carriers");
    c.vocab.weekdays = v.at("weekdays");
    c.vocab.slots = v.at("slots");
    const json& s = j.at("stats");
    const json& channels = s.at("channels");
    if (channels.size() != features::kNumContinuous)
      throw ValidationError(path + ": expected " + std::to_string(features::kNumContinuous) +
                            " channel statistics");
    for (std::size_t i = 0; i < features::kNumContinuous; ++i) {
      c.stats.channels[i].mean = channels[i].at("mean");
      c.stats.channels[i].std = channels[i].at("std");
      c.stats.channels[i].scaled = channels[i].at("scaled");
    }
    c.stats.ports = vocab_from(s.at("ports"));
    c.stats.terminals = vocab_from(s.at("terminals"));
    c.stats.carriers = vocab_from(s.at("carriers"));

    const model::ModelParams shape = model::ModelParams::zeros(c.model, c.vocab);
    const json& params = j.at("params");
    if (params.size() != shape.size())
      throw ValidationError(path + ": parameter count does not match the model config");
    for (std::size_t i = 0; i < params.size(); ++i) {
      const std::string name = params[i].at("name");
      if (name != shape.name(i))
        throw ValidationError(path + ": expected parameter '" + shape.name(i) + "', found '" + name + "'");
      model::Matrix value = matrix_from(params[i], name);
      if (value.rows() != shape.value(i).rows() || value.cols() != shape.value(i).cols())
        throw ValidationError(path + ": parameter '" + name + "' has the wrong shape");
      c.params.add(name, std::move(value));
    }
    const json& a = j.at("adam");
    c.adam.beta1 = a.at("beta1");
    c.adam.beta2 = a.at("beta2");
    c.adam.eps = a.at("eps");
    c.adam.step = a.at("step");
    for (const auto& x : a.at("m")) c.adam.m.push_back(matrix_from(x, "adam.m"));
    for (const auto& x : a.at("v")) c.adam.v.push_back(matrix_from(x, "adam.v"));
    if (c.adam.m.size() != c.params.size() || c.adam.v.size() != c.params.size())
      throw ValidationError(path + ": optimizer state does not match the parameters");
    return c;
  } catch (const json::exception& e) {
    throw ValidationError(path + ": malformed checkpoint field (" + e.what() + ")");
  }
}

}  // namespace voyagecast
