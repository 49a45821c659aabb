#include "starlight/neural.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>

namespace starlight {

void NetConfig::validate() const {
  if (obs_dim < 1) fail("config", "net: obs_dim must be positive");
  if (n_branches < 1) fail("config", "net: n_branches must be positive");
  if (n_actions < 2) fail("config", "net: n_actions must be at least 2");
  if (trunk.empty()) fail("config", "net: trunk needs at least one layer");
  for (int w : trunk)
    if (w < 1) fail("config", "net: trunk widths must be positive");
  if (head_hidden < 1) fail("config", "net: head_hidden must be positive");
}

NetConfig NetConfig::from_json(const Json& j) {
  NetConfig cfg;
  if (!j.contains("obs_dim") || !j.contains("n_branches"))
    fail("parse", "net: 'obs_dim' and 'n_branches' are required");
  cfg.obs_dim = j["obs_dim"].get<int>();
  cfg.n_branches = j["n_branches"].get<int>();
  cfg.n_actions = j.value("n_actions", cfg.n_actions);
  if (j.contains("trunk")) cfg.trunk = j["trunk"].get<std::vector<int>>();
  cfg.head_hidden = j.value("head_hidden", cfg.head_hidden);
  cfg.validate();
  return cfg;
}

Json NetConfig::to_json() const {
  return Json{{"obs_dim", obs_dim},
              {"n_branches", n_branches},
              {"n_actions", n_actions},
              {"trunk", trunk},
              {"head_hidden", head_hidden}};
}

std::vector<double> dueling_combine(double value, const std::vector<double>& advantages,
                                    int n_actions) {
  std::vector<double> q(advantages.size());
  int n_branches = static_cast<int>(advantages.size()) / n_actions;
  for (int k = 0; k < n_branches; ++k) {
    const double* a = advantages.data() + static_cast<size_t>(k) * n_actions;
    double mean = 0.0;
    for (int i = 0; i < n_actions; ++i) mean += a[i];
    mean /= n_actions;
    for (int i = 0; i < n_actions; ++i)
      q[static_cast<size_t>(k) * n_actions + i] = value + a[i] - mean;
  }
  return q;
}

BranchingNet::BranchingNet(NetConfig cfg) : cfg_(std::move(cfg)) {
  cfg_.validate();
  auto add_block = [this](int in, int out) {
    Block blk{n_params_, n_params_ + in * out, in, out};
    n_params_ += in * out + out;
    return blk;
  };
  int width = cfg_.obs_dim;
  for (int w : cfg_.trunk) {
    trunk_.push_back(add_block(width, w));
    width = w;
  }
  v_hidden_ = add_block(width, cfg_.head_hidden);
  v_out_ = add_block(cfg_.head_hidden, 1);
  for (int k = 0; k < cfg_.n_branches; ++k) {
    a_hidden_.push_back(add_block(width, cfg_.head_hidden));
    a_out_.push_back(add_block(cfg_.head_hidden, cfg_.n_actions));
  }
  params_.assign(n_params_, 0.0);
}

void BranchingNet::init_random(Rng& rng) {
  auto fill = [&](const Block& blk) {
    double limit = std::sqrt(6.0 / (blk.in + blk.out));
    for (int i = 0; i < blk.in * blk.out; ++i)
      params_[blk.w + i] = (2.0 * rng.uniform() - 1.0) * limit;
    for (int i = 0; i < blk.out; ++i) params_[blk.b + i] = 0.0;
  };
  for (const Block& blk : trunk_) fill(blk);
  fill(v_hidden_);
  fill(v_out_);
  for (int k = 0; k < cfg_.n_branches; ++k) {
    fill(a_hidden_[k]);
    fill(a_out_[k]);
  }
}

void BranchingNet::affine(const Block& blk, const double* x, double* y) const {
  const double* w = params_.data() + blk.w;
  const double* b = params_.data() + blk.b;
  for (int o = 0; o < blk.out; ++o) {
    double acc = b[o];
    const double* row = w + static_cast<size_t>(o) * blk.in;
    for (int i = 0; i < blk.in; ++i) acc += row[i] * x[i];
    y[o] = acc;
  }
}

void BranchingNet::affine_relu(const Block& blk, const double* x, double* y) const {
  affine(blk, x, y);
  for (int o = 0; o < blk.out; ++o)
    if (y[o] < 0.0) y[o] = 0.0;
}

void BranchingNet::backprop_affine(const Block& blk, const double* x, const double* dy,
                                   double* dx, std::vector<double>& grad) const {
  const double* w = params_.data() + blk.w;
  double* gw = grad.data() + blk.w;
  double* gb = grad.data() + blk.b;
  if (dx)
    for (int i = 0; i < blk.in; ++i) dx[i] = 0.0;
  for (int o = 0; o < blk.out; ++o) {
    double d = dy[o];
    if (d == 0.0) continue;
    gb[o] += d;
    const double* row = w + static_cast<size_t>(o) * blk.in;
    double* grow = gw + static_cast<size_t>(o) * blk.in;
    for (int i = 0; i < blk.in; ++i) {
      grow[i] += d * x[i];
      if (dx) dx[i] += d * row[i];
    }
  }
}

struct BranchingNet::Cache {
  std::vector<std::vector<double>> trunk_acts;  // [0] = obs, then each layer's ReLU output
  std::vector<double> v_hidden;
  std::vector<std::vector<double>> a_hidden;
};

BranchingNet::Output BranchingNet::forward_cached(const std::vector<double>& obs,
                                                  Cache& cache) const {
  if (static_cast<int>(obs.size()) != cfg_.obs_dim)
    fail("state", "net: observation has dimension " + std::to_string(obs.size()) +
                      ", expected " + std::to_string(cfg_.obs_dim));
  cache.trunk_acts.assign(1, obs);
  for (const Block& blk : trunk_) {
    std::vector<double> y(blk.out);
    affine_relu(blk, cache.trunk_acts.back().data(), y.data());
    cache.trunk_acts.push_back(std::move(y));
  }
  const std::vector<double>& top = cache.trunk_acts.back();

  cache.v_hidden.assign(v_hidden_.out, 0.0);
  affine_relu(v_hidden_, top.data(), cache.v_hidden.data());
  double value = 0.0;
  affine(v_out_, cache.v_hidden.data(), &value);

  Output out;
  out.value = value;
  out.advantages.assign(static_cast<size_t>(cfg_.n_branches) * cfg_.n_actions, 0.0);
  cache.a_hidden.assign(cfg_.n_branches, {});
  for (int k = 0; k < cfg_.n_branches; ++k) {
    cache.a_hidden[k].assign(a_hidden_[k].out, 0.0);
    affine_relu(a_hidden_[k], top.data(), cache.a_hidden[k].data());
    affine(a_out_[k], cache.a_hidden[k].data(),
           out.advantages.data() + static_cast<size_t>(k) * cfg_.n_actions);
  }
  out.q = dueling_combine(out.value, out.advantages, cfg_.n_actions);
  return out;
}

BranchingNet::Output BranchingNet::forward(const std::vector<double>& obs) const {
  Cache cache;
  return forward_cached(obs, cache);
}

double BranchingNet::loss_and_gradients(const std::vector<std::vector<double>>& obs,
                                        const std::vector<std::vector<int>>& actions,
                                        const std::vector<std::vector<bool>>& activated,
                                        const std::vector<double>& targets,
                                        std::vector<double>& grad) const {
  size_t batch = obs.size();
  if (actions.size() != batch || activated.size() != batch || targets.size() != batch)
    fail("state", "net: batch arrays disagree in length");
  grad.assign(n_params_, 0.0);
  if (batch == 0) return 0.0;

  double loss = 0.0;
  Cache cache;
  std::vector<double> d_top(trunk_.back().out);
  std::vector<double> d_hidden(cfg_.head_hidden);
  std::vector<double> d_buf;
  for (size_t s = 0; s < batch; ++s) {
    Output out = forward_cached(obs[s], cache);
    int n_active = 0;
    for (int k = 0; k < cfg_.n_branches; ++k)
      if (activated[s][k]) ++n_active;
    if (n_active == 0) continue;

    // dL/dQ for the chosen action of each activated branch.
    double inv = 1.0 / (static_cast<double>(n_active) * static_cast<double>(batch));
    std::fill(d_top.begin(), d_top.end(), 0.0);
    double d_value = 0.0;
    for (int k = 0; k < cfg_.n_branches; ++k) {
      if (!activated[s][k]) continue;
      int a = actions[s][k];
      if (a < 0 || a >= cfg_.n_actions) fail("state", "net: action index out of range");
      double err = out.q[static_cast<size_t>(k) * cfg_.n_actions + a] - targets[s];
      loss += err * err * inv;
      double dq = 2.0 * err * inv;

      // Q_k(a) = V + A_k(a) - mean A_k: route dq to V and to the head.
      d_value += dq;
      std::vector<double> d_adv(cfg_.n_actions, -dq / cfg_.n_actions);
      d_adv[a] += dq;
      d_hidden.assign(cfg_.head_hidden, 0.0);
      backprop_affine(a_out_[k], cache.a_hidden[k].data(), d_adv.data(), d_hidden.data(), grad);
      for (int i = 0; i < cfg_.head_hidden; ++i)
        if (cache.a_hidden[k][i] <= 0.0) d_hidden[i] = 0.0;
      d_buf.assign(trunk_.back().out, 0.0);
      backprop_affine(a_hidden_[k], cache.trunk_acts.back().data(), d_hidden.data(),
                      d_buf.data(), grad);
      for (int i = 0; i < trunk_.back().out; ++i) d_top[i] += d_buf[i];
    }

    // Value head.
    d_hidden.assign(cfg_.head_hidden, 0.0);
    backprop_affine(v_out_, cache.v_hidden.data(), &d_value, d_hidden.data(), grad);
    for (int i = 0; i < cfg_.head_hidden; ++i)
      if (cache.v_hidden[i] <= 0.0) d_hidden[i] = 0.0;
    d_buf.assign(trunk_.back().out, 0.0);
    backprop_affine(v_hidden_, cache.trunk_acts.back().data(), d_hidden.data(), d_buf.data(),
                    grad);
    for (int i = 0; i < trunk_.back().out; ++i) d_top[i] += d_buf[i];

    // Trunk, top to bottom.
    std::vector<double> d_cur = d_top;
    for (int layer = static_cast<int>(trunk_.size()) - 1; layer >= 0; --layer) {
      const std::vector<double>& act = cache.trunk_acts[layer + 1];
      for (int i = 0; i < trunk_[layer].out; ++i)
        if (act[i] <= 0.0) d_cur[i] = 0.0;
      std::vector<double> d_prev(trunk_[layer].in, 0.0);
      backprop_affine(trunk_[layer], cache.trunk_acts[layer].data(), d_cur.data(),
                      layer > 0 ? d_prev.data() : nullptr, grad);
      d_cur = std::move(d_prev);
    }
  }
  return loss;
}

void BranchingNet::save(std::ostream& out) const {
  std::string header = cfg_.to_json().dump();
  out << header << '\n';
  std::uint64_t count = static_cast<std::uint64_t>(params_.size());
  out.write(reinterpret_cast<const char*>(&count), sizeof count);
  out.write(reinterpret_cast<const char*>(params_.data()),
            static_cast<std::streamsize>(params_.size() * sizeof(double)));
  if (!out) fail("io", "failed to write network snapshot");
}

BranchingNet BranchingNet::load(std::istream& in) {
  std::string header;
  if (!std::getline(in, header)) fail("io", "network snapshot: missing header");
  Json j;
  try {
    j = Json::parse(header);
  } catch (const nlohmann::json::exception& e) {
    fail("parse", std::string("network snapshot header: ") + e.what());
  }
  BranchingNet net(NetConfig::from_json(j));
  std::uint64_t count = 0;
  in.read(reinterpret_cast<char*>(&count), sizeof count);
  if (!in || count != static_cast<std::uint64_t>(net.n_params_))
    fail("parse", "network snapshot: parameter count mismatch");
  in.read(reinterpret_cast<char*>(net.params_.data()),
          static_cast<std::streamsize>(count * sizeof(double)));
  if (!in) fail("io", "network snapshot: truncated parameters");
  return net;
}

std::vector<double> finite_difference_gradient(BranchingNet net,
                                               const std::vector<std::vector<double>>& obs,
                                               const std::vector<std::vector<int>>& actions,
                                               const std::vector<std::vector<bool>>& activated,
                                               const std::vector<double>& targets, double eps) {
  std::vector<double> fd(net.param_count());
  std::vector<double> scratch;
  for (int i = 0; i < net.param_count(); ++i) {
    double saved = net.params()[i];
    net.params()[i] = saved + eps;
    double up = net.loss_and_gradients(obs, actions, activated, targets, scratch);
    net.params()[i] = saved - eps;
    double down = net.loss_and_gradients(obs, actions, activated, targets, scratch);
    net.params()[i] = saved;
    fd[i] = (up - down) / (2.0 * eps);
  }
  return fd;
}

void AdamState::save(std::ostream& out) const {
  Json j{{"lr", lr}, {"beta1", beta1}, {"beta2", beta2}, {"eps", eps}, {"t", t}};
  out << j.dump() << '\n';
  std::uint64_t count = static_cast<std::uint64_t>(m.size());
  out.write(reinterpret_cast<const char*>(&count), sizeof count);
  out.write(reinterpret_cast<const char*>(m.data()),
            static_cast<std::streamsize>(m.size() * sizeof(double)));
  out.write(reinterpret_cast<const char*>(v.data()),
            static_cast<std::streamsize>(v.size() * sizeof(double)));
  if (!out) fail("io", "failed to write optimizer state");
}

AdamState AdamState::load(std::istream& in) {
  std::string header;
  if (!std::getline(in, header)) fail("io", "optimizer state: missing header");
  Json j;
  try {
    j = Json::parse(header);
  } catch (const nlohmann::json::exception& e) {
    fail("parse", std::string("optimizer state header: ") + e.what());
  }
  AdamState st;
  st.lr = j["lr"].get<double>();
  st.beta1 = j["beta1"].get<double>();
  st.beta2 = j["beta2"].get<double>();
  st.eps = j["eps"].get<double>();
  st.t = j["t"].get<std::int64_t>();
  std::uint64_t count = 0;
  in.read(reinterpret_cast<char*>(&count), sizeof count);
  if (!in) fail("parse", "optimizer state: missing moment vectors");
  st.m.resize(count);
  st.v.resize(count);
  in.read(reinterpret_cast<char*>(st.m.data()), static_cast<std::streamsize>(count * sizeof(double)));
  in.read(reinterpret_cast<char*>(st.v.data()), static_cast<std::streamsize>(count * sizeof(double)));
  if (!in) fail("io", "optimizer state: truncated moment vectors");
  return st;
}

void adam_step(AdamState& st, std::vector<double>& params, const std::vector<double>& grad) {
  if (params.size() != grad.size()) fail("state", "adam: parameter/gradient size mismatch");
  if (st.m.size() != params.size()) {
    st.m.assign(params.size(), 0.0);
    st.v.assign(params.size(), 0.0);
    st.t = 0;
  }
  ++st.t;
  double c1 = 1.0 - std::pow(st.beta1, static_cast<double>(st.t));
  double c2 = 1.0 - std::pow(st.beta2, static_cast<double>(st.t));
  for (size_t i = 0; i < params.size(); ++i) {
    st.m[i] = st.beta1 * st.m[i] + (1.0 - st.beta1) * grad[i];
    st.v[i] = st.beta2 * st.v[i] + (1.0 - st.beta2) * grad[i] * grad[i];
    double mhat = st.m[i] / c1;
    double vhat = st.v[i] / c2;
    params[i] -= st.lr * mhat / (std::sqrt(vhat) + st.eps);
  }
}

void soft_update(std::vector<double>& target, const std::vector<double>& online, double tau) {
  if (target.size() != online.size()) fail("state", "soft update: size mismatch");
  for (size_t i = 0; i < target.size(); ++i)
    target[i] = tau * online[i] + (1.0 - tau) * target[i];
}

}  // namespace starlight
