// Copyright (C) 2026 rerender-pi authors
// SPDX-License-Identifier: Apache-2.0
#include "rerender/checkpoint.hpp"

#include <cstring>
#include <filesystem>
#include <fstream>

#include "json.hpp"
#include "rerender/half.hpp"

namespace fs = std::filesystem;

namespace rerender {

namespace {

using nlohmann::json;

void append_u32(std::string& out, uint32_t v) {
  char buf[4];
  std::memcpy(buf, &v, 4);
  out.append(buf, 4);
}

void append_u64(std::string& out, uint64_t v) {
  char buf[8];
  std::memcpy(buf, &v, 8);
  out.append(buf, 8);
}

void append_floats(std::string& out, const std::vector<float>& v) {
  out.append(reinterpret_cast<const char*>(v.data()), v.size() * sizeof(float));
}

}  // namespace

void save_checkpoint(const std::string& path, const RerenderModel& model,
                     const CheckpointState& state) {
  const ParamRefs params = model.parameters();

  json header;
  header["model"] = json::parse(model.config().to_json());
  header["stage"] = state.stage;
  header["epoch"] = state.epoch;
  header["global_step"] = state.global_step;
  header["train_seed"] = state.train_seed;

  json plist = json::array();
  for (const auto& [name, t] : params) {
    const Shape s = t.shape();
    plist.push_back(json{{"name", name}, {"shape", {s.n, s.c, s.h, s.w}}});
  }
  header["params"] = plist;

  json alist = json::array();
  for (const auto& [name, mv] : state.adam_moments) alist.push_back(name);
  header["adam"] = json{{"step_count", state.adam_step_count}, {"entries", alist}};

  const std::string header_str = header.dump();

  std::string blob;
  blob.append(kCheckpointMagic, 4);
  append_u32(blob, kCheckpointVersion);
  append_u64(blob, header_str.size());
  blob += header_str;
  for (const auto& [name, t] : params) append_floats(blob, t.vec());
  for (const auto& [name, mv] : state.adam_moments) {
    append_floats(blob, mv.first);
    append_floats(blob, mv.second);
  }

  const std::string tmp = path + ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    RR_RUNTIME_CHECK(os.good(), "cannot open for writing: " << tmp);
    os.write(blob.data(), static_cast<long>(blob.size()));
    RR_RUNTIME_CHECK(os.good(), "write failed: " << tmp);
  }
  fs::rename(tmp, path);
}

LoadedCheckpoint load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  RR_RUNTIME_CHECK(is.good(), "cannot open checkpoint: " << path);
  std::string bytes((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());

  RR_RUNTIME_CHECK(bytes.size() >= 16, "checkpoint truncated: " << path);
  RR_RUNTIME_CHECK(std::memcmp(bytes.data(), kCheckpointMagic, 4) == 0,
                   "bad checkpoint magic in " << path);
  uint32_t version = 0;
  std::memcpy(&version, bytes.data() + 4, 4);
  RR_RUNTIME_CHECK(version == kCheckpointVersion,
                   "unsupported checkpoint version " << version << " in " << path);
  uint64_t header_len = 0;
  std::memcpy(&header_len, bytes.data() + 8, 8);
  RR_RUNTIME_CHECK(bytes.size() >= 16 + header_len, "checkpoint truncated: " << path);

  json header = json::parse(bytes.substr(16, header_len));

  LoadedCheckpoint out;
  out.state.model_config = ModelConfig::from_json(header.at("model").dump());
  out.state.stage = header.at("stage").get<std::string>();
  out.state.epoch = header.at("epoch").get<int>();
  out.state.global_step = header.at("global_step").get<int64_t>();
  out.state.train_seed = header.at("train_seed").get<uint64_t>();
  out.state.adam_step_count = header.at("adam").at("step_count").get<int64_t>();

  out.model = RerenderModel(out.state.model_config);
  ParamRefs params = out.model.parameters();

  const auto& plist = header.at("params");
  RR_RUNTIME_CHECK(plist.size() == params.size(),
                   "checkpoint parameter count mismatch: file has "
                       << plist.size() << ", model expects " << params.size());

  size_t cursor = 16 + header_len;
  auto read_floats = [&](std::vector<float>& dst, size_t count, const std::string& what) {
    const size_t nbytes = count * sizeof(float);
    RR_RUNTIME_CHECK(cursor + nbytes <= bytes.size(),
                     "checkpoint truncated while reading " << what << ": " << path);
    dst.resize(count);
    std::memcpy(dst.data(), bytes.data() + cursor, nbytes);
    cursor += nbytes;
  };

  for (size_t i = 0; i < params.size(); ++i) {
    const auto& entry = plist[i];
    const std::string name = entry.at("name").get<std::string>();
    RR_RUNTIME_CHECK(name == params[i].first,
                     "checkpoint parameter order mismatch: expected "
                         << params[i].first << ", found " << name);
    const auto sh = entry.at("shape");
    const Shape expect = params[i].second.shape();
    RR_RUNTIME_CHECK(sh[0] == expect.n && sh[1] == expect.c && sh[2] == expect.h &&
                         sh[3] == expect.w,
                     "checkpoint shape mismatch for " << name);
    read_floats(params[i].second.vec(), static_cast<size_t>(expect.numel()), name);
  }

  for (const auto& jname : header.at("adam").at("entries")) {
    const std::string name = jname.get<std::string>();
    size_t count = 0;
    for (const auto& [pname, t] : params)
      if (pname == name) count = t.vec().size();
    RR_RUNTIME_CHECK(count > 0, "adam entry for unknown parameter " << name);
    auto& mv = out.state.adam_moments[name];
    read_floats(mv.first, count, name + ".m");
    read_floats(mv.second, count, name + ".v");
  }
  RR_RUNTIME_CHECK(cursor == bytes.size(),
                   "checkpoint has trailing bytes (" << bytes.size() - cursor << "): " << path);
  return out;
}

void cast_weights_to_half(RerenderModel& model) {
  for (auto& [name, t] : model.parameters())
    for (float& v : t.vec()) v = round_through_half(v);
}

}  // namespace rerender
