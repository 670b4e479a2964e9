#include "atoc/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <vector>

#include "json.hpp"

#include "atoc/errors.hpp"

namespace atoc {

namespace {

using nlohmann::json;

constexpr char kMagic[8] = {'A', 'T', 'O', 'C', 'C', 'K', 'P', 'T'};

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

class Reader {
 public:
  Reader(const std::string& data, const std::string& path) : data_(data), path_(path) {}

  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) {
      v |= static_cast<std::uint32_t>(static_cast<unsigned char>(data_[pos_ + i])) << (8 * i);
    }
    pos_ += 4;
    return v;
  }

  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) {
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(data_[pos_ + i])) << (8 * i);
    }
    pos_ += 8;
    return v;
  }

  std::string bytes(std::size_t n) {
    need(n);
    std::string s = data_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  void doubles(double* out, std::size_t n) {
    need(n * 8);
    for (std::size_t i = 0; i < n; ++i) {
      std::uint64_t v = 0;
      for (int b = 0; b < 8; ++b) {
        v |= static_cast<std::uint64_t>(static_cast<unsigned char>(data_[pos_ + 8 * i + b]))
             << (8 * b);
      }
      out[i] = std::bit_cast<double>(v);
    }
    pos_ += n * 8;
  }

  std::size_t remaining() const { return data_.size() - pos_; }

 private:
  void need(std::size_t n) const {
    if (data_.size() - pos_ < n) {
      throw CheckpointError(CheckpointError::Kind::Truncated,
                            path_ + ": truncated checkpoint");
    }
  }
  const std::string& data_;
  std::string path_;
  std::size_t pos_ = 0;
};

// The payload is one flat float64 stream; writer and loader walk the trainer
// in the same fixed order, so only lengths need validation.
struct Payload {
  std::string bytes;
  void append(const double* p, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) put_u64(bytes, std::bit_cast<std::uint64_t>(p[i]));
  }
  void append(const Array& a) { append(a.v.data(), a.v.size()); }
  void append(const std::vector<double>& v) { append(v.data(), v.size()); }
};

json rng_json(const Rng& rng) {
  const auto s = rng.state();
  return json{rng.seed(), s[0], s[1], s[2], s[3]};
}

void rng_restore(Rng& rng, const json& j) {
  if (!j.is_array() || j.size() != 5) {
    throw CheckpointError(CheckpointError::Kind::Schema, "malformed rng state");
  }
  rng = Rng(j[0].get<std::uint64_t>());
  rng.set_state({j[1].get<std::uint64_t>(), j[2].get<std::uint64_t>(),
                 j[3].get<std::uint64_t>(), j[4].get<std::uint64_t>()});
}

json tensors_json(const ParameterSet& ps) {
  json t = json::array();
  for (const auto& [name, a] : ps) t.push_back(json{{"name", name}, {"shape", a.shape}});
  return t;
}

void append_params(Payload& p, const ParameterSet& ps) {
  for (const auto& [name, a] : ps) p.append(a);
}

void restore_params(Reader& r, const json& tensors, ParameterSet& ps) {
  if (!tensors.is_array() || tensors.size() != ps.size()) {
    throw CheckpointError(CheckpointError::Kind::Schema,
                          "parameter tensor list does not match the network");
  }
  std::size_t k = 0;
  for (auto& [name, a] : ps) {
    const json& t = tensors[k++];
    if (t.at("name").get<std::string>() != name ||
        t.at("shape").get<std::vector<std::size_t>>() != a.shape) {
      throw CheckpointError(CheckpointError::Kind::Schema,
                            "tensor mismatch at '" + name + "'");
    }
    r.doubles(a.v.data(), a.v.size());
  }
}

void append_bn(Payload& p, const BnStats& s) {
  p.append(s.mean);
  p.append(s.var);
}

void restore_bn(Reader& r, BnStats& s) {
  r.doubles(s.mean.v.data(), s.mean.v.size());
  r.doubles(s.var.v.data(), s.var.v.size());
}

void append_adam(Payload& p, const AdamState& st) {
  for (const auto& [name, m] : st.m) {
    p.append(m);
    p.append(st.v.at(name));
  }
}

void restore_adam(Reader& r, const json& j, AdamState& st) {
  st.step = j.at("step").get<std::int64_t>();
  for (auto& [name, m] : st.m) {
    r.doubles(m.v.data(), m.v.size());
    Array& v = st.v.at(name);
    r.doubles(v.v.data(), v.v.size());
  }
}

json scenario_json(const ScenarioConfig& c) {
  return json{{"scenario", scenario_name(c.scenario)},
              {"n_agents", c.n_agents},
              {"n_prey", c.n_prey},
              {"n_landmarks", c.n_landmarks},
              {"episode_len", c.episode_len},
              {"dt", c.dt},
              {"damping", c.damping},
              {"agent_radius", c.agent_radius},
              {"landmark_radius", c.landmark_radius},
              {"ball_radius", c.ball_radius},
              {"agent_max_speed", c.agent_max_speed},
              {"prey_max_speed", c.prey_max_speed},
              {"ball_max_speed", c.ball_max_speed},
              {"ball_mass", c.ball_mass},
              {"bound", c.bound},
              {"neighbor_radius", c.neighbor_radius},
              {"contact_force", c.contact_force},
              {"contact_margin", c.contact_margin}};
}

ScenarioConfig scenario_from_json(const json& j) {
  ScenarioConfig c;
  c.scenario = scenario_from_name(j.at("scenario").get<std::string>());
  c.n_agents = j.at("n_agents").get<std::size_t>();
  c.n_prey = j.at("n_prey").get<std::size_t>();
  c.n_landmarks = j.at("n_landmarks").get<std::size_t>();
  c.episode_len = j.at("episode_len").get<std::size_t>();
  c.dt = j.at("dt").get<double>();
  c.damping = j.at("damping").get<double>();
  c.agent_radius = j.at("agent_radius").get<double>();
  c.landmark_radius = j.at("landmark_radius").get<double>();
  c.ball_radius = j.at("ball_radius").get<double>();
  c.agent_max_speed = j.at("agent_max_speed").get<double>();
  c.prey_max_speed = j.at("prey_max_speed").get<double>();
  c.ball_max_speed = j.at("ball_max_speed").get<double>();
  c.ball_mass = j.at("ball_mass").get<double>();
  c.bound = j.at("bound").get<double>();
  c.neighbor_radius = j.at("neighbor_radius").get<double>();
  c.contact_force = j.at("contact_force").get<double>();
  c.contact_margin = j.at("contact_margin").get<double>();
  return c;
}

json train_json(const TrainConfig& c) {
  return json{{"lr", c.lr},
              {"gamma", c.gamma},
              {"tau", c.tau},
              {"minibatch", c.minibatch},
              {"warmup_episodes", c.warmup_episodes},
              {"episodes", c.episodes},
              {"buffer_capacity", c.buffer_capacity},
              {"ou_theta", c.ou_theta},
              {"ou_sigma", c.ou_sigma},
              {"checkpoint_every", c.checkpoint_every},
              {"checkpoint_buffer", c.checkpoint_buffer},
              {"seed", c.seed}};
}

TrainConfig train_from_json(const json& j) {
  TrainConfig c;
  c.lr = j.at("lr").get<double>();
  c.gamma = j.at("gamma").get<double>();
  c.tau = j.at("tau").get<double>();
  c.minibatch = j.at("minibatch").get<std::size_t>();
  c.warmup_episodes = j.at("warmup_episodes").get<std::size_t>();
  c.episodes = j.at("episodes").get<std::size_t>();
  c.buffer_capacity = j.at("buffer_capacity").get<std::size_t>();
  c.ou_theta = j.at("ou_theta").get<double>();
  c.ou_sigma = j.at("ou_sigma").get<double>();
  c.checkpoint_every = j.at("checkpoint_every").get<std::size_t>();
  c.checkpoint_buffer = j.at("checkpoint_buffer").get<bool>();
  c.seed = j.at("seed").get<std::uint64_t>();
  return c;
}

json comm_json(const CommConfig& c) {
  return json{{"T", c.T},
              {"m", c.m},
              {"radius", c.radius},
              {"threshold", c.threshold},
              {"exploration", c.exploration}};
}

CommConfig comm_from_json(const json& j) {
  CommConfig c;
  c.T = j.at("T").get<std::size_t>();
  c.m = j.at("m").get<std::size_t>();
  c.radius = j.at("radius").get<double>();
  c.threshold = j.at("threshold").get<double>();
  c.exploration = j.at("exploration").get<double>();
  return c;
}

json groups_json(const GroupSet& gs) {
  json out = json::array();
  for (const Group& g : gs.groups) {
    out.push_back(json{{"initiator", g.initiator},
                       {"formed_at", g.formed_at},
                       {"members", g.members}});
  }
  return out;
}

GroupSet groups_from_json(const json& j) {
  GroupSet gs;
  for (const json& g : j) {
    Group grp;
    grp.initiator = g.at("initiator").get<std::size_t>();
    grp.formed_at = g.at("formed_at").get<std::size_t>();
    grp.members = g.at("members").get<std::vector<std::size_t>>();
    gs.groups.push_back(std::move(grp));
  }
  return gs;
}

}  // namespace

void save_checkpoint(const std::string& path, const Trainer& trainer) {
  json header;
  header["version"] = kCheckpointVersion;
  header["scenario"] = scenario_json(trainer.scenario);
  header["train"] = train_json(trainer.train);
  header["comm"] = comm_json(trainer.comm);
  header["channel"] = channel_kind_name(trainer.kind);
  header["comm_enabled"] = trainer.comm_enabled;
  header["episode"] = trainer.episode;
  header["env_rng"] = rng_json(trainer.env_rng);

  Payload payload;
  json jsides = json::array();
  for (const Side& side : trainer.sides) {
    json js;
    js["lo"] = side.lo;
    js["hi"] = side.hi;
    js["gate_rng"] = rng_json(side.gate_rng);
    js["noise_rng"] = rng_json(side.noise_rng);
    js["sample_rng"] = rng_json(side.sample_rng);

    json jp;
    jp["actor"] = tensors_json(side.actor.params);
    jp["critic"] = tensors_json(side.critic.params);
    jp["clf"] = tensors_json(side.clf.params);
    jp["channel"] = tensors_json(side.channel.params);
    jp["actor_target"] = tensors_json(side.actor_target.params);
    jp["critic_target"] = tensors_json(side.critic_target.params);
    jp["channel_target"] = tensors_json(side.channel_target.params);
    js["params"] = std::move(jp);
    append_params(payload, side.actor.params);
    append_params(payload, side.critic.params);
    append_params(payload, side.clf.params);
    append_params(payload, side.channel.params);
    append_params(payload, side.actor_target.params);
    append_params(payload, side.critic_target.params);
    append_params(payload, side.channel_target.params);

    append_bn(payload, side.actor.bn1);
    append_bn(payload, side.critic.bn1);
    append_bn(payload, side.critic.bn2);
    append_bn(payload, side.actor_target.bn1);
    append_bn(payload, side.critic_target.bn1);
    append_bn(payload, side.critic_target.bn2);

    js["adam"] = json{{"actor", {{"step", side.actor_opt.step}}},
                      {"critic", {{"step", side.critic_opt.step}}},
                      {"clf", {{"step", side.clf_opt.step}}},
                      {"channel", {{"step", side.channel_opt.step}}}};
    append_adam(payload, side.actor_opt);
    append_adam(payload, side.critic_opt);
    append_adam(payload, side.clf_opt);
    append_adam(payload, side.channel_opt);

    payload.append(side.noise.flat());

    if (trainer.train.checkpoint_buffer) {
      json jb;
      jb["cursor"] = side.buffer.cursor();
      json jt = json::array();
      for (std::size_t k = 0; k < side.buffer.size(); ++k) {
        const Transition& tr = side.buffer.slot(k);
        jt.push_back(json{{"obs_dim", tr.obs.cols()}, {"groups", groups_json(tr.comm)}});
        payload.append(tr.obs);
        payload.append(tr.act);
        payload.append(tr.rew);
        payload.append(tr.next_obs);
      }
      jb["transitions"] = std::move(jt);
      js["buffer"] = std::move(jb);
    } else {
      js["buffer"] = nullptr;
    }
    jsides.push_back(std::move(js));
  }
  header["sides"] = std::move(jsides);

  const std::string hbytes = header.dump();
  std::string out;
  out.append(kMagic, sizeof(kMagic));
  put_u32(out, kCheckpointVersion);
  put_u64(out, hbytes.size());
  out += hbytes;
  put_u64(out, payload.bytes.size() / 8);
  out += payload.bytes;

  const std::string tmp = path + ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw CheckpointError(CheckpointError::Kind::NotFound, "cannot write " + path);
    f.write(out.data(), static_cast<std::streamsize>(out.size()));
    if (!f) throw CheckpointError(CheckpointError::Kind::Truncated, "short write to " + path);
  }
  std::filesystem::rename(tmp, path);
}

Trainer load_checkpoint(const std::string& path) {
  std::string data;
  {
    std::ifstream f(path, std::ios::binary);
    if (!f) {
      throw CheckpointError(CheckpointError::Kind::NotFound, path + ": no such checkpoint");
    }
    std::ostringstream ss;
    ss << f.rdbuf();
    data = ss.str();
  }
  Reader r(data, path);
  if (r.bytes(sizeof(kMagic)) != std::string(kMagic, sizeof(kMagic))) {
    throw CheckpointError(CheckpointError::Kind::Schema, path + ": not a checkpoint file");
  }
  const std::uint32_t version = r.u32();
  if (version != kCheckpointVersion) {
    throw CheckpointError(CheckpointError::Kind::VersionMismatch,
                          path + ": format version " + std::to_string(version) +
                              ", expected " + std::to_string(kCheckpointVersion));
  }
  const std::uint64_t hlen = r.u64();
  json header;
  try {
    header = json::parse(r.bytes(hlen));
  } catch (const json::exception& e) {
    throw CheckpointError(CheckpointError::Kind::Schema,
                          path + ": bad header: " + e.what());
  }

  try {
    const ScenarioConfig scenario = scenario_from_json(header.at("scenario"));
    const TrainConfig train = train_from_json(header.at("train"));
    const CommConfig comm = comm_from_json(header.at("comm"));
    const ChannelKind kind = channel_kind_from_name(header.at("channel").get<std::string>());
    Trainer trainer(scenario, train, comm, kind, header.at("comm_enabled").get<bool>());
    trainer.episode = header.at("episode").get<std::size_t>();
    rng_restore(trainer.env_rng, header.at("env_rng"));

    const std::uint64_t payload_doubles = r.u64();
    if (r.remaining() != payload_doubles * 8) {
      throw CheckpointError(CheckpointError::Kind::Truncated,
                            path + ": payload length mismatch");
    }

    const json& jsides = header.at("sides");
    if (!jsides.is_array() || jsides.size() != trainer.sides.size()) {
      throw CheckpointError(CheckpointError::Kind::Schema,
                            path + ": side count does not match the scenario");
    }
    for (std::size_t s = 0; s < trainer.sides.size(); ++s) {
      Side& side = trainer.sides[s];
      const json& js = jsides[s];
      if (js.at("lo").get<std::size_t>() != side.lo ||
          js.at("hi").get<std::size_t>() != side.hi) {
        throw CheckpointError(CheckpointError::Kind::Schema,
                              path + ": agent range mismatch");
      }
      rng_restore(side.gate_rng, js.at("gate_rng"));
      rng_restore(side.noise_rng, js.at("noise_rng"));
      rng_restore(side.sample_rng, js.at("sample_rng"));

      const json& jp = js.at("params");
      restore_params(r, jp.at("actor"), side.actor.params);
      restore_params(r, jp.at("critic"), side.critic.params);
      restore_params(r, jp.at("clf"), side.clf.params);
      restore_params(r, jp.at("channel"), side.channel.params);
      restore_params(r, jp.at("actor_target"), side.actor_target.params);
      restore_params(r, jp.at("critic_target"), side.critic_target.params);
      restore_params(r, jp.at("channel_target"), side.channel_target.params);

      restore_bn(r, side.actor.bn1);
      restore_bn(r, side.critic.bn1);
      restore_bn(r, side.critic.bn2);
      restore_bn(r, side.actor_target.bn1);
      restore_bn(r, side.critic_target.bn1);
      restore_bn(r, side.critic_target.bn2);

      const json& ja = js.at("adam");
      restore_adam(r, ja.at("actor"), side.actor_opt);
      restore_adam(r, ja.at("critic"), side.critic_opt);
      restore_adam(r, ja.at("clf"), side.clf_opt);
      restore_adam(r, ja.at("channel"), side.channel_opt);

      std::vector<double> ou(2 * side.n_agents());
      r.doubles(ou.data(), ou.size());
      side.noise.set_flat(ou);

      const json& jb = js.at("buffer");
      if (!jb.is_null()) {
        const std::size_t n = side.n_agents();
        std::vector<Transition> store;
        for (const json& jt : jb.at("transitions")) {
          Transition tr;
          const std::size_t obs_dim = jt.at("obs_dim").get<std::size_t>();
          tr.obs = Array({n, obs_dim});
          tr.act = Array({n, kActionDim});
          tr.rew.resize(n);
          tr.next_obs = Array({n, obs_dim});
          r.doubles(tr.obs.v.data(), tr.obs.v.size());
          r.doubles(tr.act.v.data(), tr.act.v.size());
          r.doubles(tr.rew.data(), tr.rew.size());
          r.doubles(tr.next_obs.v.data(), tr.next_obs.v.size());
          tr.comm = groups_from_json(jt.at("groups"));
          store.push_back(std::move(tr));
        }
        side.buffer.restore(std::move(store), jb.at("cursor").get<std::size_t>());
      }
    }
    if (r.remaining() != 0) {
      throw CheckpointError(CheckpointError::Kind::Schema,
                            path + ": trailing payload bytes");
    }
    return trainer;
  } catch (const json::exception& e) {
    throw CheckpointError(CheckpointError::Kind::Schema,
                          path + ": bad header: " + e.what());
  }
}

}  // namespace atoc
