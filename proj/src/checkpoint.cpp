#include "picnet/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <map>
#include <vector>

#include <json.hpp>

#include "picnet/errors.hpp"

namespace picnet {

using nlohmann::json;

namespace {

constexpr char kMagic[8] = {'P', 'I', 'C', 'N', 'E', 'T', '0', '1'};

json config_to_json(const ModelConfig& c) {
  json j;
  j["n_pca"] = c.n_pca;
  j["patch"] = c.patch;
  j["n_fim"] = c.n_fim;
  j["c_h"] = c.c_h;
  j["c_x"] = c.c_x;
  j["d_model"] = c.d_model;
  j["n_classes"] = c.n_classes;
  j["c_aux"] = c.c_aux;
  j["lambda1"] = c.lambda1;
  j["lambda2"] = c.lambda2;
  j["se_reduction"] = c.se_reduction;
  j["stem3d_channels"] = c.stem3d_channels;
  j["recomb3d_channels"] = c.recomb3d_channels;
  j["use_fim"] = c.use_fim;
  j["use_picm"] = c.use_picm;
  return j;
}

ModelConfig config_from_json(const json& j) {
  ModelConfig c;
  c.n_pca = j.at("n_pca").get<int>();
  c.patch = j.at("patch").get<int>();
  c.n_fim = j.at("n_fim").get<int>();
  c.c_h = j.at("c_h").get<int>();
  c.c_x = j.at("c_x").get<int>();
  c.d_model = j.at("d_model").get<int>();
  c.n_classes = j.at("n_classes").get<int>();
  c.c_aux = j.at("c_aux").get<int>();
  c.lambda1 = j.at("lambda1").get<double>();
  c.lambda2 = j.at("lambda2").get<double>();
  c.se_reduction = j.at("se_reduction").get<int>();
  c.stem3d_channels = j.at("stem3d_channels").get<int>();
  c.recomb3d_channels = j.at("recomb3d_channels").get<int>();
  c.use_fim = j.at("use_fim").get<bool>();
  c.use_picm = j.at("use_picm").get<bool>();
  return c;
}

}  // namespace

void save_checkpoint(const std::string& path, const PicnetModel& model,
                     const AdamState& adam, std::int64_t epoch,
                     std::uint64_t seed) {
  // Gather every payload tensor under its table name. std::map keeps the
  // table and the payload in sorted-name order, matching the JSON dump.
  std::map<std::string, std::pair<Shape, const std::vector<double>*>> table;
  NamedParams params = model.named_params();
  AdamState adam_full = adam;  // materialize moments for every parameter
  adam_full.ensure_registered(params);
  for (const auto& [name, t] : params) {
    table["param." + name] = {t.shape(), &t.node()->data};
  }
  std::map<std::string, Shape> param_shapes;
  for (const auto& [name, t] : params) param_shapes[name] = t.shape();
  for (const auto& [name, m] : adam_full.moment1()) {
    table["adam.m." + name] = {param_shapes.at(name), &m};
  }
  for (const auto& [name, v] : adam_full.moment2()) {
    table["adam.v." + name] = {param_shapes.at(name), &v};
  }

  json tensors;
  std::int64_t offset = 0;
  for (const auto& [name, entry] : table) {
    json t;
    t["shape"] = entry.first;
    t["offset"] = offset;
    tensors[name] = t;
    offset += static_cast<std::int64_t>(entry.second->size()) * 8;
  }

  json header;
  header["format"] = 1;
  header["epoch"] = epoch;
  header["seed"] = seed;
  header["model_config"] = config_to_json(model.config());
  header["adam"] = {{"step", adam_full.step_count()},
                    {"lr", adam_full.lr},
                    {"beta1", adam_full.beta1},
                    {"beta2", adam_full.beta2},
                    {"epsilon", adam_full.epsilon}};
  header["tensors"] = tensors;
  const std::string htext = header.dump();

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError(path + ": cannot open for writing");
  out.write(kMagic, sizeof(kMagic));
  const std::uint32_t hlen = static_cast<std::uint32_t>(htext.size());
  out.write(reinterpret_cast<const char*>(&hlen), sizeof(hlen));
  out.write(htext.data(), static_cast<std::streamsize>(htext.size()));
  for (const auto& [name, entry] : table) {
    out.write(reinterpret_cast<const char*>(entry.second->data()),
              static_cast<std::streamsize>(entry.second->size() * 8));
  }
  if (!out) throw IoError(path + ": write failed");
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError(path + ": cannot open");
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw DataError(path + ": not a PICNET01 checkpoint");
  }
  std::uint32_t hlen = 0;
  in.read(reinterpret_cast<char*>(&hlen), sizeof(hlen));
  if (!in) throw DataError(path + ": truncated header length");
  std::string htext(hlen, '\0');
  in.read(htext.data(), hlen);
  if (!in) throw DataError(path + ": truncated header");
  json header;
  try {
    header = json::parse(htext);
  } catch (const json::exception& e) {
    throw DataError(path + ": bad header: " + e.what());
  }

  Checkpoint ckpt;
  ckpt.format = header.at("format").get<int>();
  if (ckpt.format != 1) {
    throw DataError(path + ": unsupported format " +
                    std::to_string(ckpt.format));
  }
  ckpt.epoch = header.at("epoch").get<std::int64_t>();
  ckpt.seed = header.at("seed").get<std::uint64_t>();
  ckpt.config = config_from_json(header.at("model_config"));
  const json& adam = header.at("adam");
  ckpt.adam = AdamState(adam.at("lr").get<double>(),
                        adam.at("beta1").get<double>(),
                        adam.at("beta2").get<double>(),
                        adam.at("epsilon").get<double>());
  ckpt.adam.set_step_count(adam.at("step").get<std::int64_t>());

  const json& tensors = header.at("tensors");
  const std::streampos payload_start = in.tellg();
  for (auto it = tensors.begin(); it != tensors.end(); ++it) {
    const std::string& name = it.key();
    Shape shape = it.value().at("shape").get<Shape>();
    const std::int64_t offset = it.value().at("offset").get<std::int64_t>();
    const std::int64_t count = shape_numel(shape);
    std::vector<double> data(static_cast<std::size_t>(count));
    in.seekg(payload_start + static_cast<std::streamoff>(offset));
    in.read(reinterpret_cast<char*>(data.data()),
            static_cast<std::streamsize>(count * 8));
    if (!in) throw DataError(path + ": truncated payload for '" + name + "'");
    if (name.rfind("param.", 0) == 0) {
      ckpt.params[name.substr(6)] =
          Tensor::from(std::move(shape), std::move(data), true);
    } else if (name.rfind("adam.m.", 0) == 0) {
      ckpt.adam.moment1()[name.substr(7)] = std::move(data);
    } else if (name.rfind("adam.v.", 0) == 0) {
      ckpt.adam.moment2()[name.substr(7)] = std::move(data);
    } else {
      throw DataError(path + ": unknown tensor entry '" + name + "'");
    }
  }
  return ckpt;
}

PicnetModel model_from_checkpoint(const Checkpoint& ckpt) {
  PicnetModel model(ckpt.config, ckpt.seed);
  for (auto& [name, t] : model.named_params()) {
    auto it = ckpt.params.find(name);
    if (it == ckpt.params.end()) {
      throw DataError("checkpoint missing parameter '" + name + "'");
    }
    if (!same_shape(it->second.shape(), t.shape())) {
      throw DataError("checkpoint parameter '" + name + "' has shape " +
                      shape_str(it->second.shape()) + ", model expects " +
                      shape_str(t.shape()));
    }
    Tensor dst = t;
    dst.mutable_data() = it->second.data();
  }
  return model;
}

}  // namespace picnet
