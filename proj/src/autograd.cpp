#include "fsp/autograd.hpp"

#include <cassert>
#include <cmath>

namespace fsp::nn {

namespace {
constexpr double kInvSqrt2 = 0.7071067811865475244;
constexpr double kInvSqrt2Pi = 0.3989422804014326779;
}  // namespace

Node* Tape::make(Mat value, std::vector<Node*> parents, std::function<void(Node&)> bw) {
  auto node = std::make_unique<Node>();
  node->owned = std::move(value);
  node->value = &node->owned;
  node->grad = Mat::Zero(node->owned.rows(), node->owned.cols());
  node->parents = std::move(parents);
  node->backward = std::move(bw);
  for (Node* p : node->parents) {
    if (p->needs_grad) {
      node->needs_grad = true;
      break;
    }
  }
  Node* raw = node.get();
  nodes_.push_back(std::move(node));
  return raw;
}

Node* Tape::leaf(const Mat& external, bool needs_grad) {
  auto node = std::make_unique<Node>();
  node->value = &external;
  node->grad = Mat::Zero(external.rows(), external.cols());
  node->needs_grad = needs_grad;
  Node* raw = node.get();
  nodes_.push_back(std::move(node));
  return raw;
}

Node* Tape::constant(Mat v) {
  Node* n = make(std::move(v), {}, nullptr);
  n->needs_grad = false;
  return n;
}

Node* Tape::matmul(Node* a, Node* b) {
  return make(a->val() * b->val(), {a, b}, [](Node& n) {
    Node* a = n.parents[0];
    Node* b = n.parents[1];
    if (a->needs_grad) a->grad.noalias() += n.grad * b->val().transpose();
    if (b->needs_grad) b->grad.noalias() += a->val().transpose() * n.grad;
  });
}

Node* Tape::add(Node* a, Node* b) {
  return make(a->val() + b->val(), {a, b}, [](Node& n) {
    n.parents[0]->grad += n.grad;
    n.parents[1]->grad += n.grad;
  });
}

Node* Tape::add_row(Node* a, Node* bias) {
  Mat v = a->val();
  v.rowwise() += bias->val().row(0);
  return make(std::move(v), {a, bias}, [](Node& n) {
    n.parents[0]->grad += n.grad;
    n.parents[1]->grad.row(0) += n.grad.colwise().sum();
  });
}

Node* Tape::scale(Node* a, double s) {
  return make(a->val() * s, {a}, [s](Node& n) { n.parents[0]->grad += n.grad * s; });
}

Node* Tape::gelu(Node* a) {
  // exact GELU: x * Phi(x); smooth everywhere, which keeps central
  // finite differences honest
  Mat v = a->val().unaryExpr(
      [](double x) { return 0.5 * x * (1.0 + std::erf(x * kInvSqrt2)); });
  return make(std::move(v), {a}, [](Node& n) {
    const Mat& x = n.parents[0]->val();
    n.parents[0]->grad.array() +=
        n.grad.array() * x.unaryExpr([](double x) {
                            double phi = 0.5 * (1.0 + std::erf(x * kInvSqrt2));
                            double pdf = kInvSqrt2Pi * std::exp(-0.5 * x * x);
                            return phi + x * pdf;
                          }).array();
  });
}

Node* Tape::layer_norm(Node* x, Node* gain, Node* bias, double eps) {
  const Mat& in = x->val();
  const Eigen::Index rows = in.rows(), cols = in.cols();
  Mat normalized(rows, cols);
  Eigen::VectorXd inv_std(rows);
  for (Eigen::Index r = 0; r < rows; ++r) {
    double mean = in.row(r).mean();
    double var = (in.row(r).array() - mean).square().mean();
    inv_std(r) = 1.0 / std::sqrt(var + eps);
    normalized.row(r) = (in.row(r).array() - mean) * inv_std(r);
  }
  Mat out = normalized;
  out.array().rowwise() *= gain->val().row(0).array();
  out.rowwise() += bias->val().row(0);

  return make(std::move(out), {x, gain, bias},
              [normalized, inv_std](Node& n) {
                Node* x = n.parents[0];
                Node* gain = n.parents[1];
                Node* bias = n.parents[2];
                const Eigen::Index rows = n.grad.rows(), cols = n.grad.cols();
                bias->grad.row(0) += n.grad.colwise().sum();
                gain->grad.row(0) +=
                    (n.grad.array() * normalized.array()).colwise().sum().matrix();
                if (!x->needs_grad) return;
                (void)cols;
                for (Eigen::Index r = 0; r < rows; ++r) {
                  // dL/dnorm for this row
                  Eigen::RowVectorXd dn = n.grad.row(r).cwiseProduct(gain->val().row(0));
                  const double mean_dn = dn.mean();
                  const double mean_dn_norm = dn.cwiseProduct(normalized.row(r)).mean();
                  x->grad.row(r) +=
                      inv_std(r) * (dn.array() - mean_dn -
                                    normalized.row(r).array() * mean_dn_norm)
                                       .matrix();
                }
              });
}

Node* Tape::attention(Node* q, Node* k, Node* v, int num_heads, bool causal) {
  const Eigen::Index n = q->val().rows();
  const Eigen::Index m = k->val().rows();
  const Eigen::Index d = q->val().cols();
  assert(d % num_heads == 0);
  const Eigen::Index dh = d / num_heads;
  const double inv_sqrt_dh = 1.0 / std::sqrt(static_cast<double>(dh));

  std::vector<Mat> probs(static_cast<std::size_t>(num_heads));
  Mat out(n, d);
  for (int h = 0; h < num_heads; ++h) {
    auto qh = q->val().middleCols(h * dh, dh);
    auto kh = k->val().middleCols(h * dh, dh);
    auto vh = v->val().middleCols(h * dh, dh);
    Mat scores = qh * kh.transpose() * inv_sqrt_dh;
    if (causal) {
      for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = i + 1; j < m; ++j) scores(i, j) = -1e30;
    }
    probs[h] = softmax_rows(scores);
    out.middleCols(h * dh, dh).noalias() = probs[h] * vh;
  }

  return make(std::move(out), {q, k, v},
              [num_heads, dh, inv_sqrt_dh, probs = std::move(probs)](Node& node) {
                Node* q = node.parents[0];
                Node* k = node.parents[1];
                Node* v = node.parents[2];
                for (int h = 0; h < num_heads; ++h) {
                  auto qh = q->val().middleCols(h * dh, dh);
                  auto kh = k->val().middleCols(h * dh, dh);
                  auto vh = v->val().middleCols(h * dh, dh);
                  auto d_out = node.grad.middleCols(h * dh, dh);
                  const Mat& a = probs[static_cast<std::size_t>(h)];
                  if (v->needs_grad)
                    v->grad.middleCols(h * dh, dh).noalias() += a.transpose() * d_out;
                  if (!q->needs_grad && !k->needs_grad) continue;
                  Mat da = d_out * vh.transpose();
                  Mat ds = a.array() *
                           (da.array().colwise() -
                            (da.array() * a.array()).rowwise().sum());
                  ds *= inv_sqrt_dh;
                  if (q->needs_grad)
                    q->grad.middleCols(h * dh, dh).noalias() += ds * kh;
                  if (k->needs_grad)
                    k->grad.middleCols(h * dh, dh).noalias() += ds.transpose() * qh;
                }
              });
}

Node* Tape::gather_rows(Node* table, std::vector<int> rows) {
  Mat v(static_cast<Eigen::Index>(rows.size()), table->val().cols());
  for (std::size_t i = 0; i < rows.size(); ++i) v.row(static_cast<Eigen::Index>(i)) = table->val().row(rows[i]);
  return make(std::move(v), {table}, [rows = std::move(rows)](Node& n) {
    Node* table = n.parents[0];
    if (!table->needs_grad) return;
    for (std::size_t i = 0; i < rows.size(); ++i)
      table->grad.row(rows[i]) += n.grad.row(static_cast<Eigen::Index>(i));
  });
}

Node* Tape::mean_rows(Node* x, std::vector<int> rows) {
  assert(!rows.empty());
  Mat v = Mat::Zero(1, x->val().cols());
  for (int r : rows) v.row(0) += x->val().row(r);
  v /= static_cast<double>(rows.size());
  return make(std::move(v), {x}, [rows = std::move(rows)](Node& n) {
    const double w = 1.0 / static_cast<double>(rows.size());
    for (int r : rows) n.parents[0]->grad.row(r) += n.grad.row(0) * w;
  });
}

Node* Tape::dropout(Node* x, double rate, std::mt19937_64& rng) {
  if (rate <= 0.0) return x;
  const double keep = 1.0 - rate;
  Mat mask(x->val().rows(), x->val().cols());
  for (Eigen::Index c = 0; c < mask.cols(); ++c) {
    for (Eigen::Index r = 0; r < mask.rows(); ++r) {
      const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
      mask(r, c) = u < keep ? 1.0 / keep : 0.0;
    }
  }
  Mat v = x->val().cwiseProduct(mask);
  return make(std::move(v), {x}, [mask = std::move(mask)](Node& n) {
    n.parents[0]->grad += n.grad.cwiseProduct(mask);
  });
}

Node* Tape::softmax_cross_entropy(Node* logits, std::vector<int> targets) {
  assert(static_cast<Eigen::Index>(targets.size()) == logits->val().rows());
  Mat probs = softmax_rows(logits->val());
  double loss = 0.0;
  for (std::size_t i = 0; i < targets.size(); ++i) {
    loss -= std::log(std::max(probs(static_cast<Eigen::Index>(i), targets[i]), 1e-300));
  }
  loss /= static_cast<double>(targets.size());
  Mat out(1, 1);
  out(0, 0) = loss;
  return make(std::move(out), {logits},
              [probs = std::move(probs), targets = std::move(targets)](Node& n) {
                const double g = n.grad(0, 0) / static_cast<double>(targets.size());
                Mat d = probs;
                for (std::size_t i = 0; i < targets.size(); ++i)
                  d(static_cast<Eigen::Index>(i), targets[i]) -= 1.0;
                n.parents[0]->grad += d * g;
              });
}

void Tape::backward(Node* root) {
  assert(root->grad.size() == 1);
  root->grad(0, 0) = 1.0;
  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
    Node& n = **it;
    if (n.backward && n.needs_grad) n.backward(n);
  }
}

Mat softmax_rows(const Mat& logits) {
  Mat out(logits.rows(), logits.cols());
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    const double mx = logits.row(r).maxCoeff();
    Eigen::ArrayXd e = (logits.row(r).array() - mx).exp();
    out.row(r) = (e / e.sum()).matrix();
  }
  return out;
}

}  // namespace fsp::nn
