#include "metarl/encoder.hpp"

#include <cmath>

#include "metarl/logging.hpp"

namespace metarl::encoder {

double kl_to_prior(const GaussianBelief& belief) {
  double kl = 0.0;
  for (std::size_t i = 0; i < belief.mean.size(); ++i) {
    double mu = belief.mean[i];
    double ls = belief.log_std[i];
    double var = std::exp(2.0 * ls);
    kl += 0.5 * (var + mu * mu - 1.0 - 2.0 * ls);
  }
  return kl;
}

Kind kind_from_string(const std::string& s) {
  if (s == "gnn") return Kind::gnn;
  if (s == "gp") return Kind::gp;
  if (s == "ws") return Kind::ws;
  throw ConfigError("unknown encoder '" + s + "' (expected gnn|gp|ws)");
}

std::string to_string(Kind k) {
  switch (k) {
    case Kind::gnn: return "gnn";
    case Kind::gp: return "gp";
    case Kind::ws: return "ws";
  }
  return "?";
}

EncoderParams make_encoder(const EncoderConfig& cfg, Rng& rng) {
  if (cfg.feature_dim == 0) throw ConfigError("encoder feature_dim must be set");
  EncoderParams p;
  p.cfg = cfg;
  std::vector<std::size_t> emb{cfg.feature_dim, cfg.embed_hidden, cfg.channels};
  p.embedder = make_mlp(emb, Activation::tanh, Activation::tanh, rng);
  double limit = std::sqrt(6.0 / static_cast<double>(2 * cfg.channels));
  auto init = [&](Tensor t) {
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(-limit, limit);
    return t;
  };
  p.stage1_affinity = init(Tensor({cfg.latent_nodes, cfg.channels}));
  p.attn_query = init(Tensor({cfg.channels, cfg.channels}));
  p.attn_key = init(Tensor({cfg.channels, cfg.channels}));
  p.attn_value = init(Tensor({cfg.channels, cfg.channels}));
  p.stage2_affinity = init(Tensor({1, cfg.channels}));
  std::vector<std::size_t> head{cfg.channels, cfg.latent_dim};
  p.mean_head = make_mlp(head, Activation::identity, Activation::identity, rng, 1e-2);
  p.log_std_head = make_mlp(head, Activation::identity, Activation::identity, rng, 1e-2);
  std::vector<std::size_t> factor{cfg.channels, 2 * cfg.latent_dim};
  p.factor_head = make_mlp(factor, Activation::identity, Activation::identity, rng, 1e-2);
  return p;
}

std::vector<Tensor*> param_refs(EncoderParams& p) {
  std::vector<Tensor*> out = param_refs(p.embedder);
  out.push_back(&p.stage1_affinity);
  out.push_back(&p.attn_query);
  out.push_back(&p.attn_key);
  out.push_back(&p.attn_value);
  out.push_back(&p.stage2_affinity);
  for (Tensor* t : param_refs(p.mean_head)) out.push_back(t);
  for (Tensor* t : param_refs(p.log_std_head)) out.push_back(t);
  for (Tensor* t : param_refs(p.factor_head)) out.push_back(t);
  return out;
}

std::vector<const Tensor*> param_refs(const EncoderParams& p) {
  std::vector<const Tensor*> out = param_refs(p.embedder);
  out.push_back(&p.stage1_affinity);
  out.push_back(&p.attn_query);
  out.push_back(&p.attn_key);
  out.push_back(&p.attn_value);
  out.push_back(&p.stage2_affinity);
  for (const Tensor* t : param_refs(p.mean_head)) out.push_back(t);
  for (const Tensor* t : param_refs(p.log_std_head)) out.push_back(t);
  for (const Tensor* t : param_refs(p.factor_head)) out.push_back(t);
  return out;
}

std::size_t context_feature_dim(tasks::Family family) {
  return 2 * tasks::state_dim(family) + tasks::action_dim(family) + 1;
}

Tensor context_matrix(std::span<const tasks::Transition> transitions, tasks::Family family) {
  if (transitions.empty()) {
    throw ProtocolError("empty context: substitute the prior belief instead of encoding");
  }
  std::size_t sd = tasks::state_dim(family);
  std::size_t ad = tasks::action_dim(family);
  Tensor out({transitions.size(), 2 * sd + ad + 1});
  for (std::size_t i = 0; i < transitions.size(); ++i) {
    const auto& tr = transitions[i];
    std::size_t c = 0;
    for (std::size_t k = 0; k < sd; ++k) out.at(i, c++) = tr.state[k];
    for (std::size_t k = 0; k < ad; ++k) out.at(i, c++) = tr.action[k];
    out.at(i, c++) = tr.reward;
    for (std::size_t k = 0; k < sd; ++k) out.at(i, c++) = tr.next_state[k];
  }
  return out;
}

Value aggregate(Value nodes, Value affinities) {
  Tape& t = *nodes.tape;
  if (t.value(nodes).rows() == 0) throw ProtocolError("aggregate: empty node set");
  Value logits = matmul(affinities, transpose(nodes));  // [k, n]
  Value weights = softmax_rows(logits);
  return matmul(weights, nodes);  // [k, c]
}

Value self_attend(Value latent, Value query_w, Value key_w, Value value_w,
                  std::size_t iters) {
  Tape& t = *latent.tape;
  double inv_scale = 1.0 / std::sqrt(static_cast<double>(t.value(latent).cols()));
  Value h = latent;
  for (std::size_t it = 0; it < iters; ++it) {
    Value q = matmul(h, query_w);
    Value k = matmul(h, key_w);
    Value v = matmul(h, value_w);
    Value attn = softmax_rows(scale(matmul(q, transpose(k)), inv_scale));
    h = add(h, matmul(attn, v));  // residual
  }
  return h;
}

EncoderVars lift_encoder(Tape& tape, const EncoderParams& p, bool requires_grad) {
  EncoderVars v;
  v.embedder = lift_mlp(tape, p.embedder, requires_grad);
  v.stage1_affinity = tape.leaf(p.stage1_affinity, requires_grad);
  v.attn_query = tape.leaf(p.attn_query, requires_grad);
  v.attn_key = tape.leaf(p.attn_key, requires_grad);
  v.attn_value = tape.leaf(p.attn_value, requires_grad);
  v.stage2_affinity = tape.leaf(p.stage2_affinity, requires_grad);
  v.mean_head = lift_mlp(tape, p.mean_head, requires_grad);
  v.log_std_head = lift_mlp(tape, p.log_std_head, requires_grad);
  v.factor_head = lift_mlp(tape, p.factor_head, requires_grad);
  return v;
}

namespace {

BeliefVars gp_encode_on(Tape& tape, const EncoderVars& vars, const EncoderConfig& cfg,
                        Value embedded) {
  std::size_t dz = cfg.latent_dim;
  Value factors = mlp_apply(vars.factor_head, embedded);  // [n, 2*dz]
  Value mu = slice_cols(factors, 0, dz);
  Value log_sigma = clamp_v(slice_cols(factors, dz, 2 * dz), kLogStdMin, kLogStdMax);
  Value sigma_raw = exp_v(log_sigma);
  const Tensor& sr = tape.value(sigma_raw);
  for (std::size_t i = 0; i < sr.size(); ++i) {
    if (sr[i] < kFactorSigmaFloor) {
      EventCounters::sigma_floors.fetch_add(1, std::memory_order_relaxed);
      break;
    }
  }
  Value sigma = clamp_v(sigma_raw, kFactorSigmaFloor, 1e30);
  Value inv_var = divide(tape.constant(Tensor::full(tape.value(sigma).shape(), 1.0)),
                         mul(sigma, sigma));            // [n, dz]
  Value precision = col_sums(inv_var);                  // [1, dz]
  Value weighted_mean = col_sums(mul(mu, inv_var));     // [1, dz]
  BeliefVars out;
  out.mean = divide(weighted_mean, precision);
  out.log_std = clamp_v(scale(log_v(precision), -0.5), kLogStdMin, kLogStdMax);
  return out;
}

}  // namespace

BeliefVars encode_on(Tape& tape, const EncoderVars& vars, const EncoderConfig& cfg,
                     const Tensor& raw_context, Kind kind) {
  if (raw_context.rows() == 0) {
    throw ProtocolError("empty context: substitute the prior belief instead of encoding");
  }
  if (raw_context.cols() != cfg.feature_dim) {
    throw ShapeError("context feature extent " + std::to_string(raw_context.cols()) +
                     " does not match configured feature_dim " +
                     std::to_string(cfg.feature_dim));
  }
  Value embedded = mlp_apply(vars.embedder, tape.constant(raw_context));  // [n, c]
  if (kind == Kind::gp) return gp_encode_on(tape, vars, cfg, embedded);

  Value latent = aggregate(embedded, vars.stage1_affinity);  // [d, c]
  if (kind == Kind::gnn) {
    latent = self_attend(latent, vars.attn_query, vars.attn_key, vars.attn_value,
                         cfg.attention_iters);
  }
  Value summary = aggregate(latent, vars.stage2_affinity);  // [1, c]
  BeliefVars out;
  out.mean = mlp_apply(vars.mean_head, summary);
  out.log_std = clamp_v(mlp_apply(vars.log_std_head, summary), kLogStdMin, kLogStdMax);
  return out;
}

Value kl_to_prior(BeliefVars belief) {
  Value var = exp_v(scale(belief.log_std, 2.0));
  Value term = sub(add(var, mul(belief.mean, belief.mean)),
                   add_scalar(scale(belief.log_std, 2.0), 1.0));
  return scale(sum_all(term), 0.5);
}

namespace {

GaussianBelief run_plain(const EncoderParams& p, const Tensor& raw_context, Kind kind) {
  Tape tape;
  EncoderVars vars = lift_encoder(tape, p, /*requires_grad=*/false);
  BeliefVars b = encode_on(tape, vars, p.cfg, raw_context, kind);
  return {tape.value(b.mean), tape.value(b.log_std)};
}

}  // namespace

GaussianBelief encode(const EncoderParams& p, const Tensor& raw_context) {
  return run_plain(p, raw_context, p.cfg.kind);
}

GaussianBelief gnn_encode(const EncoderParams& p, const Tensor& raw_context) {
  return run_plain(p, raw_context, Kind::gnn);
}

GaussianBelief gp_encode(const EncoderParams& p, const Tensor& raw_context) {
  return run_plain(p, raw_context, Kind::gp);
}

GaussianBelief ws_encode(const EncoderParams& p, const Tensor& raw_context) {
  return run_plain(p, raw_context, Kind::ws);
}

}  // namespace metarl::encoder
