#include "revdec/models/neural.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "revdec/error.hpp"

namespace revdec::models {

std::string_view neural_kind_name(NeuralKind kind) {
  switch (kind) {
    case NeuralKind::kFfnn: return "ffnn";
    case NeuralKind::kCnnBow: return "cnn_bow";
    case NeuralKind::kCnnEmbedding: return "cnn_embedding";
    case NeuralKind::kLstm: return "lstm";
  }
  return "unknown";
}

std::string_view input_mode_name(InputMode mode) {
  switch (mode) {
    case InputMode::kTerms: return "terms";
    case InputMode::kSequence: return "sequence";
    case InputMode::kTokenIds: return "token_ids";
  }
  return "unknown";
}

namespace {

[[noreturn]] void shape_error(const std::string& what) { throw Error(ErrorCode::kShape, what); }

// Frames seen by the conv / LSTM layer: (count, width).
std::pair<std::size_t, std::size_t> frame_shape(const NeuralArch& a) {
  switch (a.input) {
    case InputMode::kTerms: return {a.term_dim, 1};
    case InputMode::kSequence: return {a.seq_len, a.embedding_dim};
    case InputMode::kTokenIds: return {a.seq_len, a.term_dim};
  }
  return {0, 0};
}

std::size_t word_dim(const NeuralArch& a) {
  return a.input == InputMode::kTerms ? a.term_dim : a.seq_len * a.embedding_dim;
}

std::size_t head_input_dim(const NeuralArch& a) {
  switch (a.kind) {
    case NeuralKind::kFfnn: return word_dim(a) + a.user_dim;
    case NeuralKind::kCnnBow:
    case NeuralKind::kCnnEmbedding: return a.filters * a.pooled_length() + a.user_dim;
    case NeuralKind::kLstm: return a.lstm_units + a.user_dim;
  }
  return 0;
}

}  // namespace

std::size_t NeuralArch::conv_length() const {
  const auto [frames, width] = frame_shape(*this);
  return frames >= kernel ? frames - kernel + 1 : 0;
}

std::size_t NeuralArch::pooled_length() const {
  const std::size_t len = conv_length();
  if (pool == 0) return len > 0 ? 1 : 0;
  return len / pool;
}

void NeuralArch::validate() const {
  auto positive = [](std::size_t v, const char* what) {
    if (v == 0) shape_error(std::string(what) + " must be positive");
  };
  auto rate = [](double r, const char* what) {
    if (!(r >= 0 && r < 1)) shape_error(std::string(what) + " must be in [0, 1)");
  };
  switch (input) {
    case InputMode::kTerms: positive(term_dim, "term_dim"); break;
    case InputMode::kSequence:
      positive(seq_len, "seq_len");
      positive(embedding_dim, "embedding_dim");
      break;
    case InputMode::kTokenIds:
      positive(seq_len, "seq_len");
      positive(term_dim, "term_dim");
      break;
  }
  switch (kind) {
    case NeuralKind::kFfnn:
      if (input == InputMode::kTokenIds) shape_error("ffnn does not take token-id input");
      positive(hidden1, "hidden1");
      positive(hidden2, "hidden2");
      rate(dropout, "dropout");
      break;
    case NeuralKind::kCnnBow:
    case NeuralKind::kCnnEmbedding: {
      const InputMode want = kind == NeuralKind::kCnnBow ? InputMode::kTerms : InputMode::kSequence;
      if (input != want) shape_error("cnn input mode does not match its kind");
      positive(filters, "filters");
      positive(kernel, "kernel");
      rate(conv_dropout, "conv_dropout");
      positive(dense_units, "dense_units");
      const auto [frames, width] = frame_shape(*this);
      if (frames < kernel) {
        shape_error("input length " + std::to_string(frames) + " is shorter than kernel " +
                    std::to_string(kernel));
      }
      if (pooled_length() == 0) {
        shape_error("pool size " + std::to_string(pool) + " exceeds conv output length " +
                    std::to_string(conv_length()));
      }
      break;
    }
    case NeuralKind::kLstm:
      if (input == InputMode::kTerms) shape_error("lstm needs sequence or token-id input");
      positive(lstm_units, "lstm_units");
      positive(dense_units, "dense_units");
      break;
  }
}

NeuralArch ffnn_arch(std::size_t hidden1, std::size_t hidden2) {
  NeuralArch a;
  a.kind = NeuralKind::kFfnn;
  a.input = InputMode::kTerms;
  a.hidden1 = hidden1;
  a.hidden2 = hidden2;
  a.dropout = 0.25;
  return a;
}

NeuralArch cnn_bow_arch(std::size_t pool) {
  NeuralArch a;
  a.kind = NeuralKind::kCnnBow;
  a.input = InputMode::kTerms;
  a.filters = 50;
  a.kernel = 10;
  a.pool = pool;
  a.conv_dropout = 0.5;
  a.dense_units = 8;
  return a;
}

NeuralArch cnn_embedding_arch(std::size_t pool) {
  NeuralArch a = cnn_bow_arch(pool);
  a.kind = NeuralKind::kCnnEmbedding;
  a.input = InputMode::kSequence;
  return a;
}

NeuralArch lstm_arch(InputMode input) {
  NeuralArch a;
  a.kind = NeuralKind::kLstm;
  a.input = input;
  a.lstm_units = 10;
  a.dense_units = 8;
  return a;
}

// ---------------------------------------------------------------------------
// Layer kernels. Dense kernels are stored (in, out) so a non-zero input
// touches one contiguous row.

namespace {

void dense_forward(std::span<const double> in, const double* w, const double* b,
                   std::span<double> out) {
  const std::size_t n_out = out.size();
  std::copy(b, b + n_out, out.begin());
  for (std::size_t i = 0; i < in.size(); ++i) {
    const double v = in[i];
    if (v == 0) continue;
    const double* row = w + i * n_out;
    for (std::size_t o = 0; o < n_out; ++o) out[o] += v * row[o];
  }
}

// din may be empty when the input gradient is not needed.
void dense_backward(std::span<const double> in, std::span<const double> dout, const double* w,
                    double* dw, double* db, std::span<double> din) {
  const std::size_t n_out = dout.size();
  for (std::size_t o = 0; o < n_out; ++o) db[o] += dout[o];
  for (std::size_t i = 0; i < in.size(); ++i) {
    const double v = in[i];
    const double* row = w + i * n_out;
    double* grow = dw + i * n_out;
    if (v != 0) {
      for (std::size_t o = 0; o < n_out; ++o) grow[o] += v * dout[o];
    }
    if (!din.empty()) {
      double s = 0;
      for (std::size_t o = 0; o < n_out; ++o) s += row[o] * dout[o];
      din[i] = s;
    }
  }
}

void relu_inplace(std::span<double> v) {
  for (double& x : v) x = x > 0 ? x : 0;
}

void dropout_mask(std::span<double> mask, double rate, Rng* rng) {
  if (rng == nullptr || rate == 0) {
    std::fill(mask.begin(), mask.end(), 1.0);
    return;
  }
  const double keep = 1.0 - rate;
  for (double& m : mask) m = rng->uniform() < keep ? 1.0 / keep : 0.0;
}

double tanh_(double x) { return std::tanh(x); }

}  // namespace

// ---------------------------------------------------------------------------
// Network

Network::Network(NeuralArch arch, std::uint64_t seed) : arch_(std::move(arch)) {
  arch_.validate();
  Rng rng(seed);
  auto add = [&](const std::string& name, std::vector<std::size_t> shape, bool l2,
                 double limit) {
    Param p;
    p.name = name;
    p.shape = std::move(shape);
    std::size_t n = 1;
    for (std::size_t s : p.shape) n *= s;
    p.value.resize(n);
    for (double& v : p.value) v = limit > 0 ? rng.uniform(-limit, limit) : 0.0;
    p.l2 = l2;
    params_.push_back(std::move(p));
  };
  auto glorot = [](double fan_in, double fan_out) { return std::sqrt(6.0 / (fan_in + fan_out)); };
  auto dense = [&](const std::string& name, std::size_t in, std::size_t out, bool l2) {
    add(name + ".kernel", {in, out}, l2, glorot(double(in), double(out)));
    add(name + ".bias", {out}, false, 0);
  };
  const std::size_t head_in = head_input_dim(arch_);
  const auto [frames, width] = frame_shape(arch_);
  switch (arch_.kind) {
    case NeuralKind::kFfnn:
      dense("dense1", head_in, arch_.hidden1, true);
      dense("dense2", arch_.hidden1, arch_.hidden2, true);
      dense("output", arch_.hidden2, 1, false);
      break;
    case NeuralKind::kCnnBow:
    case NeuralKind::kCnnEmbedding: {
      const double field = double(arch_.kernel * width);
      add("conv.kernel", {arch_.filters, arch_.kernel, width}, false,
          glorot(field, field * double(arch_.filters)));
      add("conv.bias", {arch_.filters}, false, 0);
      dense("dense1", head_in, arch_.dense_units, true);
      dense("dense2", arch_.dense_units, arch_.dense_units, true);
      dense("output", arch_.dense_units, 1, false);
      break;
    }
    case NeuralKind::kLstm: {
      const std::size_t h = arch_.lstm_units;
      add("lstm.kernel", {width, 4 * h}, false, glorot(double(width), double(4 * h)));
      add("lstm.recurrent", {h, 4 * h}, false, glorot(double(h), double(4 * h)));
      add("lstm.bias", {4 * h}, false, 0);
      for (std::size_t k = 0; k < h; ++k) params_.back().value[h + k] = 1.0;
      dense("dense1", head_in, arch_.dense_units, true);
      dense("dense2", arch_.dense_units, arch_.dense_units, true);
      dense("output", arch_.dense_units, 1, false);
      break;
    }
  }
  bind();
}

void Network::bind() {
  auto find = [&](const std::string& name) -> std::size_t {
    for (std::size_t i = 0; i < params_.size(); ++i) {
      if (params_[i].name == name) return i;
    }
    throw Error(ErrorCode::kFormat, "network is missing parameter " + name);
  };
  slot_ = Slots{};
  slot_.d1w = find("dense1.kernel");
  slot_.d1b = find("dense1.bias");
  slot_.d2w = find("dense2.kernel");
  slot_.d2b = find("dense2.bias");
  slot_.outw = find("output.kernel");
  slot_.outb = find("output.bias");
  if (arch_.kind == NeuralKind::kCnnBow || arch_.kind == NeuralKind::kCnnEmbedding) {
    slot_.convw = find("conv.kernel");
    slot_.convb = find("conv.bias");
  }
  if (arch_.kind == NeuralKind::kLstm) {
    slot_.lstm_wx = find("lstm.kernel");
    slot_.lstm_wh = find("lstm.recurrent");
    slot_.lstm_b = find("lstm.bias");
  }
  // Shapes must match the architecture exactly.
  const std::size_t head_in = head_input_dim(arch_);
  auto expect = [&](std::size_t idx, std::size_t n) {
    if (params_[idx].value.size() != n) {
      throw Error(ErrorCode::kFormat, "parameter " + params_[idx].name + " has " +
                                          std::to_string(params_[idx].value.size()) +
                                          " values, expected " + std::to_string(n));
    }
  };
  const std::size_t u1 = arch_.kind == NeuralKind::kFfnn ? arch_.hidden1 : arch_.dense_units;
  const std::size_t u2 = arch_.kind == NeuralKind::kFfnn ? arch_.hidden2 : arch_.dense_units;
  expect(slot_.d1w, head_in * u1);
  expect(slot_.d1b, u1);
  expect(slot_.d2w, u1 * u2);
  expect(slot_.d2b, u2);
  expect(slot_.outw, u2);
  expect(slot_.outb, 1);
  const auto [frames, width] = frame_shape(arch_);
  if (arch_.kind == NeuralKind::kCnnBow || arch_.kind == NeuralKind::kCnnEmbedding) {
    expect(slot_.convw, arch_.filters * arch_.kernel * width);
    expect(slot_.convb, arch_.filters);
  }
  if (arch_.kind == NeuralKind::kLstm) {
    const std::size_t h = arch_.lstm_units;
    expect(slot_.lstm_wx, width * 4 * h);
    expect(slot_.lstm_wh, h * 4 * h);
    expect(slot_.lstm_b, 4 * h);
  }
}

std::size_t Network::parameter_count() const {
  std::size_t n = 0;
  for (const Param& p : params_) n += p.value.size();
  return n;
}

Gradients Network::zero_gradients() const {
  Gradients g;
  g.reserve(params_.size());
  for (const Param& p : params_) g.emplace_back(p.value.size(), 0.0);
  return g;
}

double Network::l2_penalty() const {
  double s = 0;
  for (const Param& p : params_) {
    if (!p.l2) continue;
    for (double v : p.value) s += v * v;
  }
  return s;
}

namespace {

void check_user(const NeuralArch& a, const Example& x) {
  if (x.user.size() != a.user_dim) {
    shape_error("expected " + std::to_string(a.user_dim) + " user features, got " +
                std::to_string(x.user.size()));
  }
}

// Loads the word representation into act (dense vector or frames).
void load_input(const NeuralArch& a, const Example& x, Activations& act) {
  check_user(a, x);
  act.frame_ids.clear();
  switch (a.input) {
    case InputMode::kTerms:
      if (x.terms.dimension != a.term_dim) {
        shape_error("term vector dimension " + std::to_string(x.terms.dimension) +
                    " != " + std::to_string(a.term_dim));
      }
      act.input.assign(a.term_dim, 0.0);
      for (const auto& [i, v] : x.terms.entries) act.input[i] = v;
      act.frames = a.term_dim;
      act.frame_width = 1;
      break;
    case InputMode::kSequence:
      if (x.sequence.rows != a.seq_len || x.sequence.cols != a.embedding_dim) {
        shape_error("sequence shape " + std::to_string(x.sequence.rows) + "x" +
                    std::to_string(x.sequence.cols) + " != " + std::to_string(a.seq_len) + "x" +
                    std::to_string(a.embedding_dim));
      }
      act.input = x.sequence.data;
      act.frames = a.seq_len;
      act.frame_width = a.embedding_dim;
      break;
    case InputMode::kTokenIds:
      act.input.clear();
      act.frame_ids.assign(x.token_ids.begin(),
                           x.token_ids.begin() + std::min(x.token_ids.size(), a.seq_len));
      for (std::size_t id : act.frame_ids) {
        if (id != kOutOfVocabulary && id >= a.term_dim) shape_error("token id out of range");
      }
      act.frames = act.frame_ids.size();
      act.frame_width = a.term_dim;
      break;
  }
}

}  // namespace

double Network::forward(const Example& x, Activations& act, Rng* rng) const {
  const NeuralArch& a = arch_;
  load_input(a, x, act);
  auto val = [&](std::size_t slot) { return params_[slot].value.data(); };

  switch (a.kind) {
    case NeuralKind::kFfnn: {
      act.head_in = act.input;
      act.head_in.insert(act.head_in.end(), x.user.begin(), x.user.end());
      act.h1.assign(a.hidden1, 0.0);
      dense_forward(act.head_in, val(slot_.d1w), val(slot_.d1b), act.h1);
      relu_inplace(act.h1);
      act.mask1.resize(a.hidden1);
      dropout_mask(act.mask1, a.dropout, rng);
      std::vector<double> dropped(a.hidden1);
      for (std::size_t k = 0; k < a.hidden1; ++k) dropped[k] = act.h1[k] * act.mask1[k];
      act.h2.assign(a.hidden2, 0.0);
      dense_forward(dropped, val(slot_.d2w), val(slot_.d2b), act.h2);
      relu_inplace(act.h2);
      break;
    }
    case NeuralKind::kCnnBow:
    case NeuralKind::kCnnEmbedding: {
      const std::size_t width = act.frame_width;
      const std::size_t field = a.kernel * width;
      const std::size_t len = a.conv_length();
      const std::size_t plen = a.pooled_length();
      const std::size_t pool = a.pool == 0 ? len : a.pool;
      const double* w = val(slot_.convw);
      const double* b = val(slot_.convb);
      act.conv.assign(a.filters * len, 0.0);
      for (std::size_t f = 0; f < a.filters; ++f) {
        const double* wf = w + f * field;
        double* out = act.conv.data() + f * len;
        for (std::size_t t = 0; t < len; ++t) {
          const double* window = act.input.data() + t * width;
          double s = b[f];
          for (std::size_t j = 0; j < field; ++j) s += wf[j] * window[j];
          out[t] = s > 0 ? s : 0;
        }
      }
      act.pooled.assign(a.filters * plen, 0.0);
      act.argmax.assign(a.filters * plen, 0);
      for (std::size_t f = 0; f < a.filters; ++f) {
        const double* row = act.conv.data() + f * len;
        for (std::size_t p = 0; p < plen; ++p) {
          std::size_t best = p * pool;
          for (std::size_t t = p * pool + 1; t < (p + 1) * pool; ++t) {
            if (row[t] > row[best]) best = t;
          }
          act.pooled[f * plen + p] = row[best];
          act.argmax[f * plen + p] = best;
        }
      }
      act.conv_mask.resize(act.pooled.size());
      dropout_mask(act.conv_mask, a.conv_dropout, rng);
      act.head_in.resize(act.pooled.size());
      for (std::size_t k = 0; k < act.pooled.size(); ++k) {
        act.head_in[k] = act.pooled[k] * act.conv_mask[k];
      }
      act.head_in.insert(act.head_in.end(), x.user.begin(), x.user.end());
      break;
    }
    case NeuralKind::kLstm: {
      const std::size_t h = a.lstm_units;
      const std::size_t g4 = 4 * h;
      const double* wx = val(slot_.lstm_wx);
      const double* wh = val(slot_.lstm_wh);
      const double* b = val(slot_.lstm_b);
      const std::size_t steps =
          a.input == InputMode::kTokenIds ? act.frames : std::min(x.sequence_length, a.seq_len);
      act.steps = steps;
      act.gates.assign(steps * g4, 0.0);
      act.cell.assign(steps * h, 0.0);
      act.cell_tanh.assign(steps * h, 0.0);
      act.hidden.assign(steps * h, 0.0);
      std::vector<double> pre(g4);
      for (std::size_t t = 0; t < steps; ++t) {
        std::copy(b, b + g4, pre.begin());
        if (a.input == InputMode::kTokenIds) {
          const std::size_t id = act.frame_ids[t];
          if (id != kOutOfVocabulary) {
            const double* row = wx + id * g4;
            for (std::size_t k = 0; k < g4; ++k) pre[k] += row[k];
          }
        } else {
          const double* xt = act.input.data() + t * act.frame_width;
          for (std::size_t j = 0; j < act.frame_width; ++j) {
            if (xt[j] == 0) continue;
            const double* row = wx + j * g4;
            for (std::size_t k = 0; k < g4; ++k) pre[k] += xt[j] * row[k];
          }
        }
        if (t > 0) {
          const double* hp = act.hidden.data() + (t - 1) * h;
          for (std::size_t j = 0; j < h; ++j) {
            const double* row = wh + j * g4;
            for (std::size_t k = 0; k < g4; ++k) pre[k] += hp[j] * row[k];
          }
        }
        double* gt = act.gates.data() + t * g4;
        for (std::size_t k = 0; k < h; ++k) {
          gt[k] = sigmoid(pre[k]);
          gt[h + k] = sigmoid(pre[h + k]);
          gt[2 * h + k] = tanh_(pre[2 * h + k]);
          gt[3 * h + k] = sigmoid(pre[3 * h + k]);
          const double c_prev = t > 0 ? act.cell[(t - 1) * h + k] : 0.0;
          const double c = gt[h + k] * c_prev + gt[k] * gt[2 * h + k];
          act.cell[t * h + k] = c;
          act.cell_tanh[t * h + k] = tanh_(c);
          act.hidden[t * h + k] = gt[3 * h + k] * act.cell_tanh[t * h + k];
        }
      }
      act.head_in.assign(h, 0.0);
      if (steps > 0) {
        std::copy(act.hidden.begin() + (steps - 1) * h, act.hidden.begin() + steps * h,
                  act.head_in.begin());
      }
      act.head_in.insert(act.head_in.end(), x.user.begin(), x.user.end());
      break;
    }
  }

  if (a.kind != NeuralKind::kFfnn) {
    act.h1.assign(a.dense_units, 0.0);
    dense_forward(act.head_in, val(slot_.d1w), val(slot_.d1b), act.h1);
    relu_inplace(act.h1);
    act.h2.assign(a.dense_units, 0.0);
    dense_forward(act.h1, val(slot_.d2w), val(slot_.d2b), act.h2);
    relu_inplace(act.h2);
  }
  double z = 0;
  dense_forward(act.h2, val(slot_.outw), val(slot_.outb), std::span<double>(&z, 1));
  return z;
}

double Network::logit(const Example& x) const {
  Activations act;
  return forward(x, act, nullptr);
}

void Network::backward(const Example& /*x*/, const Activations& act, double dlogit,
                       Gradients& grads) const {
  const NeuralArch& a = arch_;
  auto val = [&](std::size_t slot) { return params_[slot].value.data(); };
  auto grad = [&](std::size_t slot) { return grads[slot].data(); };

  // Output layer.
  std::vector<double> dh2(act.h2.size());
  dense_backward(act.h2, std::span<const double>(&dlogit, 1), val(slot_.outw), grad(slot_.outw),
                 grad(slot_.outb), dh2);
  for (std::size_t k = 0; k < dh2.size(); ++k) {
    if (act.h2[k] <= 0) dh2[k] = 0;
  }

  if (a.kind == NeuralKind::kFfnn) {
    std::vector<double> dropped(a.hidden1);
    for (std::size_t k = 0; k < a.hidden1; ++k) dropped[k] = act.h1[k] * act.mask1[k];
    std::vector<double> dh1(a.hidden1);
    dense_backward(dropped, dh2, val(slot_.d2w), grad(slot_.d2w), grad(slot_.d2b), dh1);
    for (std::size_t k = 0; k < a.hidden1; ++k) {
      dh1[k] = act.h1[k] > 0 ? dh1[k] * act.mask1[k] : 0.0;
    }
    dense_backward(act.head_in, dh1, val(slot_.d1w), grad(slot_.d1w), grad(slot_.d1b), {});
    return;
  }

  std::vector<double> dh1(a.dense_units);
  dense_backward(act.h1, dh2, val(slot_.d2w), grad(slot_.d2w), grad(slot_.d2b), dh1);
  for (std::size_t k = 0; k < dh1.size(); ++k) {
    if (act.h1[k] <= 0) dh1[k] = 0;
  }
  std::vector<double> dhead(act.head_in.size());
  dense_backward(act.head_in, dh1, val(slot_.d1w), grad(slot_.d1w), grad(slot_.d1b), dhead);

  if (a.kind == NeuralKind::kCnnBow || a.kind == NeuralKind::kCnnEmbedding) {
    const std::size_t width = act.frame_width;
    const std::size_t field = a.kernel * width;
    const std::size_t len = a.conv_length();
    const std::size_t plen = a.pooled_length();
    double* gw = grad(slot_.convw);
    double* gb = grad(slot_.convb);
    for (std::size_t f = 0; f < a.filters; ++f) {
      for (std::size_t p = 0; p < plen; ++p) {
        const std::size_t k = f * plen + p;
        const double d = dhead[k] * act.conv_mask[k];
        if (d == 0) continue;
        const std::size_t t = act.argmax[k];
        if (act.conv[f * len + t] <= 0) continue;  // ReLU inactive
        gb[f] += d;
        const double* window = act.input.data() + t * width;
        double* gwf = gw + f * field;
        for (std::size_t j = 0; j < field; ++j) gwf[j] += d * window[j];
      }
    }
    return;
  }

  // LSTM backpropagation through time.
  const std::size_t h = a.lstm_units;
  const std::size_t g4 = 4 * h;
  const std::size_t steps = act.steps;
  if (steps == 0) return;
  const double* wh = val(slot_.lstm_wh);
  double* gwx = grad(slot_.lstm_wx);
  double* gwh = grad(slot_.lstm_wh);
  double* gb = grad(slot_.lstm_b);
  std::vector<double> dh(dhead.begin(), dhead.begin() + h);
  std::vector<double> dc(h, 0.0);
  std::vector<double> da(g4);
  for (std::size_t t = steps; t-- > 0;) {
    const double* gt = act.gates.data() + t * g4;
    for (std::size_t k = 0; k < h; ++k) {
      const double i = gt[k], f = gt[h + k], g = gt[2 * h + k], o = gt[3 * h + k];
      const double tc = act.cell_tanh[t * h + k];
      const double c_prev = t > 0 ? act.cell[(t - 1) * h + k] : 0.0;
      const double dct = dc[k] + dh[k] * o * (1 - tc * tc);
      da[k] = dct * g * i * (1 - i);
      da[h + k] = dct * c_prev * f * (1 - f);
      da[2 * h + k] = dct * i * (1 - g * g);
      da[3 * h + k] = dh[k] * tc * o * (1 - o);
      dc[k] = dct * f;
    }
    for (std::size_t k = 0; k < g4; ++k) gb[k] += da[k];
    if (a.input == InputMode::kTokenIds) {
      const std::size_t id = act.frame_ids[t];
      if (id != kOutOfVocabulary) {
        double* row = gwx + id * g4;
        for (std::size_t k = 0; k < g4; ++k) row[k] += da[k];
      }
    } else {
      const double* xt = act.input.data() + t * act.frame_width;
      for (std::size_t j = 0; j < act.frame_width; ++j) {
        if (xt[j] == 0) continue;
        double* row = gwx + j * g4;
        for (std::size_t k = 0; k < g4; ++k) row[k] += xt[j] * da[k];
      }
    }
    std::fill(dh.begin(), dh.end(), 0.0);
    if (t > 0) {
      const double* hp = act.hidden.data() + (t - 1) * h;
      for (std::size_t j = 0; j < h; ++j) {
        double* grow = gwh + j * g4;
        const double* row = wh + j * g4;
        double s = 0;
        for (std::size_t k = 0; k < g4; ++k) {
          grow[k] += hp[j] * da[k];
          s += row[k] * da[k];
        }
        dh[j] = s;
      }
    }
  }
}

Prediction NeuralModel::predict(const Example& x) const {
  if (x.schema_id != schema_id) {
    throw Error(ErrorCode::kSchema, "example schema does not match the model");
  }
  Prediction p;
  p.score = net.logit(x);
  p.p_deceptive = sigmoid(p.score);
  p.label = label_for(p.p_deceptive);
  return p;
}

// ---------------------------------------------------------------------------
// Training

double batch_loss(const Network& net, std::span<const Example> x, std::span<const Label> y,
                  double l2_lambda, Gradients* grads) {
  if (grads) *grads = net.zero_gradients();
  Activations act;
  double loss = 0;
  const double inv_n = 1.0 / static_cast<double>(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double z = net.forward(x[i], act, nullptr);
    const double t = target_of(y[i]);
    loss += bce_with_logit(z, t) * inv_n;
    if (grads) net.backward(x[i], act, (sigmoid(z) - t) * inv_n, *grads);
  }
  loss += l2_lambda * net.l2_penalty();
  if (grads) {
    const auto& params = net.params();
    for (std::size_t p = 0; p < params.size(); ++p) {
      if (!params[p].l2) continue;
      for (std::size_t k = 0; k < params[p].value.size(); ++k) {
        (*grads)[p][k] += 2 * l2_lambda * params[p].value[k];
      }
    }
  }
  return loss;
}

namespace {

class Adam {
 public:
  explicit Adam(const Network& net, double lr) : lr_(lr), m_(net.zero_gradients()),
                                                 v_(net.zero_gradients()) {}

  void step(Network& net, const Gradients& g) {
    ++t_;
    const double c1 = 1 - std::pow(kBeta1, double(t_));
    const double c2 = 1 - std::pow(kBeta2, double(t_));
    auto& params = net.params();
    for (std::size_t p = 0; p < params.size(); ++p) {
      double* w = params[p].value.data();
      double* m = m_[p].data();
      double* v = v_[p].data();
      const double* gp = g[p].data();
      for (std::size_t k = 0; k < params[p].value.size(); ++k) {
        m[k] = kBeta1 * m[k] + (1 - kBeta1) * gp[k];
        v[k] = kBeta2 * v[k] + (1 - kBeta2) * gp[k] * gp[k];
        w[k] -= lr_ * (m[k] / c1) / (std::sqrt(v[k] / c2) + kEps);
      }
    }
  }

 private:
  static constexpr double kBeta1 = 0.9;
  static constexpr double kBeta2 = 0.999;
  static constexpr double kEps = 1e-8;
  double lr_;
  std::size_t t_ = 0;
  Gradients m_, v_;
};

// Stratified holdout of roughly `fraction` per class; each class keeps at
// least one training member. Returns (train, validation).
std::pair<std::vector<std::size_t>, std::vector<std::size_t>> holdout_split(
    std::span<const Label> y, double fraction, Rng& rng) {
  std::vector<std::size_t> dec, gen, train, val;
  for (std::size_t i = 0; i < y.size(); ++i) (y[i] == Label::kDeceptive ? dec : gen).push_back(i);
  for (auto* members : {&dec, &gen}) {
    rng.shuffle(std::span<std::size_t>(*members));
    std::size_t n_val = static_cast<std::size_t>(std::lround(fraction * double(members->size())));
    n_val = std::min(n_val, members->size() - 1);
    val.insert(val.end(), members->begin(), members->begin() + n_val);
    train.insert(train.end(), members->begin() + n_val, members->end());
  }
  std::sort(train.begin(), train.end());
  std::sort(val.begin(), val.end());
  return {train, val};
}

}  // namespace

NeuralModel train_network(const NeuralArch& arch, std::span<const Example> x,
                          std::span<const Label> y, const TrainConfig& cfg) {
  cfg.validate();
  check_training_set(x, y);
  NeuralModel model;
  model.config = cfg;
  model.schema_id = x.front().schema_id;
  model.net = Network(arch, cfg.seed);
  Network& net = model.net;
  {
    Activations probe;
    for (const Example& ex : x) {
      load_input(net.arch(), ex, probe);
      if (net.arch().kind == NeuralKind::kLstm && net.arch().input == InputMode::kSequence &&
          ex.sequence_length > ex.sequence.rows) {
        shape_error("sequence_length exceeds sequence rows");
      }
    }
  }

  Rng split_rng(cfg.seed ^ 0x5bd1e995ULL);
  auto [train_idx, val_idx] = holdout_split(y, cfg.validation_fraction, split_rng);
  bool has_val = false;
  {
    bool vd = false, vg = false;
    for (std::size_t i : val_idx) (y[i] == Label::kDeceptive ? vd : vg) = true;
    has_val = vd && vg;
  }
  if (!has_val) {
    train_idx.resize(x.size());
    std::iota(train_idx.begin(), train_idx.end(), 0);
    val_idx.clear();
  }

  Adam adam(net, cfg.learning_rate);
  Rng order_rng(cfg.seed + 1);
  Rng dropout_rng(cfg.seed + 2);
  Gradients grads = net.zero_gradients();
  Activations act;
  std::vector<Param> best_params = net.params();
  double best_val = std::numeric_limits<double>::infinity();
  std::size_t since_best = 0;

  for (std::size_t epoch = 0; epoch < cfg.max_epochs; ++epoch) {
    order_rng.shuffle(std::span<std::size_t>(train_idx));
    double train_loss = 0;
    for (std::size_t start = 0; start < train_idx.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(train_idx.size(), start + cfg.batch_size);
      const double inv_b = 1.0 / double(end - start);
      for (auto& g : grads) std::fill(g.begin(), g.end(), 0.0);
      for (std::size_t k = start; k < end; ++k) {
        const std::size_t i = train_idx[k];
        const double z = net.forward(x[i], act, &dropout_rng);
        const double t = target_of(y[i]);
        train_loss += bce_with_logit(z, t);
        net.backward(x[i], act, (sigmoid(z) - t) * inv_b, grads);
      }
      const auto& params = net.params();
      for (std::size_t p = 0; p < params.size(); ++p) {
        if (!params[p].l2) continue;
        for (std::size_t k = 0; k < params[p].value.size(); ++k) {
          grads[p][k] += 2 * cfg.l2_lambda * params[p].value[k];
        }
      }
      adam.step(net, grads);
    }
    train_loss /= double(train_idx.size());
    if (!std::isfinite(train_loss)) {
      throw Error(ErrorCode::kDivergence, "training diverged at epoch " +
                                              std::to_string(epoch + 1) +
                                              "; lower the learning rate");
    }
    EpochRecord rec;
    rec.train_loss = train_loss;
    if (has_val) {
      double vl = 0;
      for (std::size_t i : val_idx) vl += bce_with_logit(net.forward(x[i], act, nullptr),
                                                         target_of(y[i]));
      rec.val_loss = vl / double(val_idx.size());
      if (!std::isfinite(rec.val_loss)) {
        throw Error(ErrorCode::kDivergence, "validation loss diverged at epoch " +
                                                std::to_string(epoch + 1));
      }
    }
    model.history.push_back(rec);
    if (!has_val) {
      model.best_epoch = epoch;
      continue;
    }
    if (rec.val_loss < best_val) {
      best_val = rec.val_loss;
      best_params = net.params();
      model.best_epoch = epoch;
      since_best = 0;
    } else if (++since_best >= cfg.early_stop_patience) {
      break;
    }
  }
  if (has_val) {
    net.params() = std::move(best_params);
    net.bind();
  }
  return model;
}

NeuralModel train_ffnn(std::span<const Example> x, std::span<const Label> y, NeuralArch arch,
                       const TrainConfig& cfg) {
  if (arch.kind != NeuralKind::kFfnn) shape_error("train_ffnn needs an ffnn architecture");
  return train_network(arch, x, y, cfg);
}

NeuralModel train_cnn(std::span<const Example> x, std::span<const Label> y, NeuralArch arch,
                      const TrainConfig& cfg) {
  if (arch.kind != NeuralKind::kCnnBow && arch.kind != NeuralKind::kCnnEmbedding) {
    shape_error("train_cnn needs a cnn architecture");
  }
  return train_network(arch, x, y, cfg);
}

NeuralModel train_lstm(std::span<const Example> x, std::span<const Label> y, NeuralArch arch,
                       const TrainConfig& cfg) {
  if (arch.kind != NeuralKind::kLstm) shape_error("train_lstm needs an lstm architecture");
  return train_network(arch, x, y, cfg);
}

double gradient_check(const Network& net, std::span<const Example> x, std::span<const Label> y,
                      double l2_lambda, std::size_t max_checks, std::uint64_t seed) {
  Gradients analytic;
  batch_loss(net, x, y, l2_lambda, &analytic);
  Network probe = net;
  Rng rng(seed);
  constexpr double kStep = 1e-5;
  double worst = 0;
  const std::size_t n_params = probe.params().size();
  for (std::size_t c = 0; c < max_checks; ++c) {
    const std::size_t p = c % n_params;
    auto& values = probe.params()[p].value;
    const std::size_t k = rng.index(values.size());
    const double orig = values[k];
    values[k] = orig + kStep;
    const double up = batch_loss(probe, x, y, l2_lambda, nullptr);
    values[k] = orig - kStep;
    const double down = batch_loss(probe, x, y, l2_lambda, nullptr);
    values[k] = orig;
    const double numeric = (up - down) / (2 * kStep);
    const double a = analytic[p][k];
    const double rel = std::abs(a - numeric) / std::max(std::abs(a) + std::abs(numeric), 1e-8);
    worst = std::max(worst, rel);
  }
  return worst;
}

}  // namespace revdec::models
