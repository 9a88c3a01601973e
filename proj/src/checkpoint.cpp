#include "csrl/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <vector>

namespace csrl {

namespace {

class Writer {
 public:
  explicit Writer(std::ofstream& out) : out_(out) {}
  void u8(std::uint8_t v) { out_.put(static_cast<char>(v)); }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) u8(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) u8(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void i32(std::int32_t v) { u32(static_cast<std::uint32_t>(v)); }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }

 private:
  std::ofstream& out_;
};

class Reader {
 public:
  explicit Reader(std::ifstream& in) : in_(in) {}
  std::uint8_t u8() {
    const int c = in_.get();
    if (c == std::char_traits<char>::eof()) throw CheckpointError("checkpoint truncated");
    return static_cast<std::uint8_t>(c);
  }
  std::uint32_t u32() {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(u8()) << (8 * i);
    return v;
  }
  std::uint64_t u64() {
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(u8()) << (8 * i);
    return v;
  }
  std::int32_t i32() { return static_cast<std::int32_t>(u32()); }
  double f64() { return std::bit_cast<double>(u64()); }

 private:
  std::ifstream& in_;
};

void write_mlp(Writer& w, const Mlp& mlp) {
  w.u32(static_cast<std::uint32_t>(mlp.layer_sizes().size()));
  for (int s : mlp.layer_sizes()) w.i32(s);
  w.u64(mlp.num_params());
  for (double p : mlp.params()) w.f64(p);
}

Mlp read_mlp(Reader& r) {
  const std::uint32_t n = r.u32();
  if (n < 2 || n > 64) throw CheckpointError("checkpoint has an invalid layer count");
  std::vector<int> sizes(n);
  for (int& s : sizes) {
    s = r.i32();
    if (s < 1 || s > 1 << 16) throw CheckpointError("checkpoint has an invalid layer size");
  }
  Mlp mlp(sizes);
  if (r.u64() != mlp.num_params()) throw CheckpointError("checkpoint parameter count mismatch");
  for (double& p : mlp.params()) p = r.f64();
  return mlp;
}

}  // namespace

void save_checkpoint(const std::string& path, const ActorCritic& net, const Hyperparams& hyper,
                     const std::vector<ExclusionRule>& rules) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw CheckpointError("cannot write checkpoint '" + path + "'");
  out.write(kCheckpointMagic, sizeof(kCheckpointMagic));
  Writer w(out);
  w.u32(kCheckpointVersion);
  w.u32(0x01020304u);
  w.f64(hyper.gamma);
  w.f64(hyper.clip_eps);
  w.f64(hyper.learning_rate);
  w.f64(hyper.entropy_coef);
  w.f64(hyper.value_coef);
  w.i32(hyper.epochs);
  w.i32(hyper.minibatch_size);
  w.i32(hyper.horizon);
  w.i32(hyper.retry_cap);
  w.u8(hyper.normalize_advantages ? 1 : 0);
  write_mlp(w, net.actor);
  write_mlp(w, net.critic);
  w.u32(static_cast<std::uint32_t>(rules.size()));
  for (const ExclusionRule& rule : rules) {
    w.i32(rule.state);
    w.i32(rule.action);
    w.u8(rule.origin == RuleOrigin::Learned ? 1 : 0);
  }
  if (!out) throw CheckpointError("failed writing checkpoint '" + path + "'");
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint '" + path + "'");
  char magic[sizeof(kCheckpointMagic)] = {};
  in.read(magic, sizeof(magic));
  if (in.gcount() != sizeof(magic) || std::memcmp(magic, kCheckpointMagic, sizeof(magic)) != 0)
    throw CheckpointError("'" + path + "' is not a checkpoint (bad magic)");
  Reader r(in);
  const std::uint32_t version = r.u32();
  if (version != kCheckpointVersion)
    throw CheckpointError("unsupported checkpoint version " + std::to_string(version));
  if (r.u32() != 0x01020304u) throw CheckpointError("checkpoint byte-order mark mismatch");
  Checkpoint ck;
  ck.hyper.gamma = r.f64();
  ck.hyper.clip_eps = r.f64();
  ck.hyper.learning_rate = r.f64();
  ck.hyper.entropy_coef = r.f64();
  ck.hyper.value_coef = r.f64();
  ck.hyper.epochs = r.i32();
  ck.hyper.minibatch_size = r.i32();
  ck.hyper.horizon = r.i32();
  ck.hyper.retry_cap = r.i32();
  ck.hyper.normalize_advantages = r.u8() != 0;
  ck.net.actor = read_mlp(r);
  ck.net.critic = read_mlp(r);
  if (ck.net.actor.input_dim() != ck.net.critic.input_dim() || ck.net.critic.output_dim() != 1)
    throw CheckpointError("checkpoint actor/critic shapes are inconsistent");
  ck.hyper.hidden.assign(ck.net.actor.layer_sizes().begin() + 1,
                         ck.net.actor.layer_sizes().end() - 1);
  const std::uint32_t n_rules = r.u32();
  if (n_rules > static_cast<std::uint32_t>(kNumStates * kNumActions))
    throw CheckpointError("checkpoint has too many exclusion rules");
  for (std::uint32_t i = 0; i < n_rules; ++i) {
    ExclusionRule rule;
    rule.state = r.i32();
    rule.action = r.i32();
    rule.origin = r.u8() ? RuleOrigin::Learned : RuleOrigin::UserGiven;
    if (rule.state < 0 || rule.state >= kNumStates || rule.action < 0 ||
        rule.action >= kDoNothingAction)
      throw CheckpointError("checkpoint has an invalid exclusion rule");
    ck.rules.push_back(rule);
  }
  in.peek();
  if (!in.eof()) throw CheckpointError("checkpoint has trailing bytes");
  return ck;
}

}  // namespace csrl
