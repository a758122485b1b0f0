#include "cwm/model/categorical.hpp"

#include <cmath>

#include "cwm/core/error.hpp"
#include "cwm/core/ops.hpp"

namespace cwm::model {

Var CategoricalDist::probs() const { return softmax_last(logits); }

Var CategoricalDist::log_probs() const { return log_softmax_last(logits); }

Tensor CategoricalDist::entropy() const {
  const Tensor& l = logits.value();
  const index_t b = batch(), v = vars(), k = classes();
  Tensor out(Shape{b});
  for (index_t i = 0; i < b; ++i) {
    double h = 0;
    for (index_t j = 0; j < v; ++j) {
      const real* row = l.data() + (i * v + j) * k;
      double m = row[0];
      for (index_t c = 1; c < k; ++c) m = std::max(m, double(row[c]));
      double z = 0;
      for (index_t c = 0; c < k; ++c) z += std::exp(row[c] - m);
      const double lz = m + std::log(z);
      for (index_t c = 0; c < k; ++c) {
        const double lp = row[c] - lz;
        h -= std::exp(lp) * lp;
      }
    }
    out[i] = static_cast<real>(h);
  }
  return out;
}

CategoricalDist make_categorical(const Var& flat_logits, index_t vars, index_t classes) {
  if (flat_logits.value().rank() != 2 || flat_logits.dim(1) != vars * classes)
    throw_runtime("categorical logits shape " + shape_str(flat_logits.shape()) + " does not match V*K = " +
                  std::to_string(vars * classes));
  return CategoricalDist{reshape(flat_logits, {flat_logits.dim(0), vars, classes})};
}

const SampleTape::Entry& SampleTape::next() {
  if (cursor_ >= entries_.size()) throw_runtime("sample tape exhausted during replay");
  return entries_[cursor_++];
}

Var sample_onehot_st(const CategoricalDist& dist, Rng& rng, SampleTape* tape) {
  if (!dist.logits.value().all_finite()) throw_runtime("non-finite logits passed to sample_onehot_st");
  const Var probs = dist.probs();
  const Tensor& p = probs.value();
  const index_t rows = dist.batch() * dist.vars(), k = dist.classes();

  Tensor sample(p.shape());
  for (index_t r = 0; r < rows; ++r) {
    const double u = rng.uniform();
    double acc = 0;
    index_t pick = k - 1;
    for (index_t c = 0; c < k; ++c) {
      acc += p[r * k + c];
      if (u < acc) {
        pick = c;
        break;
      }
    }
    sample[r * k + pick] = real(1);
  }

  if (tape && tape->mode() == SampleTape::Mode::kReplay) {
    const SampleTape::Entry& e = tape->next();
    if (!e.sample.same_shape(p)) throw_runtime("sample tape shape mismatch during replay");
    return straight_through(e.sample, probs, e.probs);
  }
  if (tape) tape->record({sample, p});
  return straight_through(sample, probs, p);
}

Tensor mode_onehot(const CategoricalDist& dist) {
  const Tensor& l = dist.logits.value();
  const index_t rows = dist.batch() * dist.vars(), k = dist.classes();
  Tensor out(l.shape());
  for (index_t r = 0; r < rows; ++r) {
    index_t best = 0;
    for (index_t c = 1; c < k; ++c)
      if (l[r * k + c] > l[r * k + best]) best = c;
    out[r * k + best] = real(1);
  }
  return out;
}

Tensor onehot_from_indices(const std::vector<index_t>& idx, index_t batch, index_t vars, index_t classes) {
  if (static_cast<index_t>(idx.size()) != batch * vars) throw_runtime("onehot index count mismatch");
  Tensor out(Shape{batch, vars, classes});
  for (index_t r = 0; r < batch * vars; ++r) {
    const index_t c = idx[size_t(r)];
    if (c < 0 || c >= classes) throw_runtime("onehot class index out of range");
    out[r * classes + c] = real(1);
  }
  return out;
}

}  // namespace cwm::model
