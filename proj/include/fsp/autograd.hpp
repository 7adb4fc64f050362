#ifndef FSP_AUTOGRAD_HPP
#define FSP_AUTOGRAD_HPP

#include <Eigen/Dense>
#include <functional>
#include <memory>
#include <random>
#include <vector>

namespace fsp::nn {

using Mat = Eigen::MatrixXd;

/// One value in the computation graph. Leaves point at external storage
/// (parameters); intermediates own theirs.
struct Node {
  const Mat* value = nullptr;
  Mat owned;
  Mat grad;
  std::vector<Node*> parents;
  std::function<void(Node&)> backward;
  bool needs_grad = false;

  const Mat& val() const { return *value; }
};

/// Reverse-mode tape. Build a graph per example, call backward once, read
/// leaf grads. Nodes live until reset().
class Tape {
 public:
  Node* leaf(const Mat& external, bool needs_grad = true);
  Node* constant(Mat v);

  Node* matmul(Node* a, Node* b);
  Node* add(Node* a, Node* b);
  /// bias is 1 x cols, added to every row of a.
  Node* add_row(Node* a, Node* bias);
  Node* scale(Node* a, double s);
  Node* gelu(Node* a);
  Node* layer_norm(Node* x, Node* gain, Node* bias, double eps = 1e-5);
  /// Multi-head attention over already-projected q (n x d), k, v (m x d).
  Node* attention(Node* q, Node* k, Node* v, int num_heads, bool causal);
  Node* gather_rows(Node* table, std::vector<int> rows);
  Node* mean_rows(Node* x, std::vector<int> rows);
  /// Inverted dropout; identity when rate == 0.
  Node* dropout(Node* x, double rate, std::mt19937_64& rng);
  /// Mean negative log-likelihood over rows of logits; 1x1 output.
  Node* softmax_cross_entropy(Node* logits, std::vector<int> targets);

  /// Seeds root with grad 1 and propagates in reverse creation order.
  void backward(Node* root);

  void reset() { nodes_.clear(); }
  std::size_t size() const { return nodes_.size(); }

 private:
  Node* make(Mat value, std::vector<Node*> parents, std::function<void(Node&)> bw);
  std::vector<std::unique_ptr<Node>> nodes_;
};

/// Row-wise softmax of a plain matrix (shared by eval-mode inference).
Mat softmax_rows(const Mat& logits);

}  // namespace fsp::nn

#endif
