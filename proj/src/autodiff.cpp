#include "autodiff.hpp"

#include <cmath>

#include "error.hpp"

namespace actsum::ad {
namespace {

void check_same_graph(Var a, Var b) {
  if (a.graph() != b.graph()) throw Error(ErrorCode::Internal, "autodiff: mixing graphs");
}

void check_shape(bool ok, const char* op) {
  if (!ok) throw Error(ErrorCode::Internal, std::string("autodiff: shape mismatch in ") + op);
}

}  // namespace

const Matrix& Var::value() const { return graph_->value(id_); }

Var Graph::param(const Parameter& p) {
  if (auto it = param_nodes_.find(&p); it != param_nodes_.end()) return Var(this, it->second);
  Node n;
  n.value = p.value;
  n.needs_grad = grad_enabled_;
  nodes_.push_back(std::move(n));
  param_nodes_.emplace(&p, nodes_.size() - 1);
  return Var(this, nodes_.size() - 1);
}

const Matrix* Graph::param_grad(const Parameter& p) const {
  const auto it = param_nodes_.find(&p);
  if (it == param_nodes_.end()) return nullptr;
  const auto& g = nodes_[it->second].grad;
  return g.size() == 0 ? nullptr : &g;
}

Var Graph::constant(Matrix value) { return push(std::move(value), false, nullptr); }

Matrix& Graph::grad(std::size_t id) {
  auto& n = nodes_[id];
  if (n.grad.size() == 0) n.grad.setZero(n.value.rows(), n.value.cols());
  return n.grad;
}

Var Graph::push(Matrix value, bool needs_grad, std::function<void(Graph&, const Matrix&)> backward) {
  Node n;
  n.value = std::move(value);
  n.needs_grad = needs_grad && grad_enabled_;
  if (n.needs_grad) n.backward = std::move(backward);
  nodes_.push_back(std::move(n));
  return Var(this, nodes_.size() - 1);
}

void Graph::backward(Var loss) {
  if (loss.graph() != this) throw Error(ErrorCode::Internal, "autodiff: loss from another graph");
  if (loss.rows() != 1 || loss.cols() != 1) throw Error(ErrorCode::Internal, "autodiff: loss must be 1x1");
  if (!nodes_[loss.id()].needs_grad) return;
  grad(loss.id()).setOnes();
  for (std::size_t i = loss.id() + 1; i-- > 0;) {
    auto& n = nodes_[i];
    if (!n.backward || n.grad.size() == 0) continue;
    n.backward(*this, n.grad);
  }
}

Var matmul(Var a, Var b) {
  check_same_graph(a, b);
  check_shape(a.cols() == b.rows(), "matmul");
  Graph& g = *a.graph();
  Matrix out = a.value() * b.value();
  const auto ia = a.id(), ib = b.id();
  return g.push(std::move(out), g.needs_grad(ia) || g.needs_grad(ib), [ia, ib](Graph& g, const Matrix& d) {
    if (g.needs_grad(ia)) g.grad(ia).noalias() += d * g.value(ib).transpose();
    if (g.needs_grad(ib)) g.grad(ib).noalias() += g.value(ia).transpose() * d;
  });
}

Var add(Var a, Var b) {
  check_same_graph(a, b);
  check_shape(a.rows() == b.rows() && a.cols() == b.cols(), "add");
  Graph& g = *a.graph();
  const auto ia = a.id(), ib = b.id();
  return g.push(a.value() + b.value(), g.needs_grad(ia) || g.needs_grad(ib),
                [ia, ib](Graph& g, const Matrix& d) {
                  if (g.needs_grad(ia)) g.grad(ia) += d;
                  if (g.needs_grad(ib)) g.grad(ib) += d;
                });
}

Var sub(Var a, Var b) {
  check_same_graph(a, b);
  check_shape(a.rows() == b.rows() && a.cols() == b.cols(), "sub");
  Graph& g = *a.graph();
  const auto ia = a.id(), ib = b.id();
  return g.push(a.value() - b.value(), g.needs_grad(ia) || g.needs_grad(ib),
                [ia, ib](Graph& g, const Matrix& d) {
                  if (g.needs_grad(ia)) g.grad(ia) += d;
                  if (g.needs_grad(ib)) g.grad(ib) -= d;
                });
}

Var mul(Var a, Var b) {
  check_same_graph(a, b);
  check_shape(a.rows() == b.rows() && a.cols() == b.cols(), "mul");
  Graph& g = *a.graph();
  const auto ia = a.id(), ib = b.id();
  return g.push(a.value().cwiseProduct(b.value()), g.needs_grad(ia) || g.needs_grad(ib),
                [ia, ib](Graph& g, const Matrix& d) {
                  if (g.needs_grad(ia)) g.grad(ia) += d.cwiseProduct(g.value(ib));
                  if (g.needs_grad(ib)) g.grad(ib) += d.cwiseProduct(g.value(ia));
                });
}

Var scale(Var a, double factor) {
  Graph& g = *a.graph();
  const auto ia = a.id();
  return g.push(a.value() * factor, g.needs_grad(ia),
                [ia, factor](Graph& g, const Matrix& d) { g.grad(ia) += d * factor; });
}

Var add_bias(Var a, Var bias) {
  check_same_graph(a, bias);
  check_shape(bias.rows() == 1 && bias.cols() == a.cols(), "add_bias");
  Graph& g = *a.graph();
  const auto ia = a.id(), ib = bias.id();
  Matrix out = a.value();
  out.rowwise() += bias.value().row(0);
  return g.push(std::move(out), g.needs_grad(ia) || g.needs_grad(ib), [ia, ib](Graph& g, const Matrix& d) {
    if (g.needs_grad(ia)) g.grad(ia) += d;
    if (g.needs_grad(ib)) g.grad(ib) += d.colwise().sum();
  });
}

Var sigmoid(Var a) {
  Graph& g = *a.graph();
  const auto ia = a.id();
  Matrix out = (1.0 + (-a.value().array()).exp()).inverse().matrix();
  const std::size_t self = g.size();
  return g.push(std::move(out), g.needs_grad(ia), [ia, self](Graph& g, const Matrix& d) {
    const auto& y = g.value(self).array();
    g.grad(ia).array() += d.array() * y * (1.0 - y);
  });
}

Var tanh(Var a) {
  Graph& g = *a.graph();
  const auto ia = a.id();
  Matrix out = a.value().array().tanh().matrix();
  const std::size_t self = g.size();
  return g.push(std::move(out), g.needs_grad(ia), [ia, self](Graph& g, const Matrix& d) {
    const auto& y = g.value(self).array();
    g.grad(ia).array() += d.array() * (1.0 - y.square());
  });
}

Var relu(Var a) {
  Graph& g = *a.graph();
  const auto ia = a.id();
  return g.push(a.value().cwiseMax(0.0), g.needs_grad(ia), [ia](Graph& g, const Matrix& d) {
    g.grad(ia).array() += (g.value(ia).array() > 0.0).select(d.array(), 0.0);
  });
}

Var slice_cols(Var a, Eigen::Index start, Eigen::Index count) {
  check_shape(start >= 0 && start + count <= a.cols(), "slice_cols");
  Graph& g = *a.graph();
  const auto ia = a.id();
  return g.push(a.value().middleCols(start, count), g.needs_grad(ia),
                [ia, start, count](Graph& g, const Matrix& d) { g.grad(ia).middleCols(start, count) += d; });
}

Var slice_rows(Var a, Eigen::Index start, Eigen::Index count) {
  check_shape(start >= 0 && start + count <= a.rows(), "slice_rows");
  Graph& g = *a.graph();
  const auto ia = a.id();
  return g.push(a.value().middleRows(start, count), g.needs_grad(ia),
                [ia, start, count](Graph& g, const Matrix& d) { g.grad(ia).middleRows(start, count) += d; });
}

Var concat_cols(std::span<const Var> parts) {
  check_shape(!parts.empty(), "concat_cols");
  Graph& g = *parts[0].graph();
  const auto rows = parts[0].rows();
  Eigen::Index cols = 0;
  bool needs = false;
  std::vector<std::size_t> ids;
  for (const auto& p : parts) {
    check_shape(p.rows() == rows && p.graph() == &g, "concat_cols");
    cols += p.cols();
    needs = needs || g.needs_grad(p.id());
    ids.push_back(p.id());
  }
  Matrix out(rows, cols);
  Eigen::Index off = 0;
  for (const auto& p : parts) {
    out.middleCols(off, p.cols()) = p.value();
    off += p.cols();
  }
  return g.push(std::move(out), needs, [ids = std::move(ids)](Graph& g, const Matrix& d) {
    Eigen::Index off = 0;
    for (auto id : ids) {
      const auto c = g.value(id).cols();
      if (g.needs_grad(id)) g.grad(id) += d.middleCols(off, c);
      off += c;
    }
  });
}

Var concat_rows(std::span<const Var> parts) {
  check_shape(!parts.empty(), "concat_rows");
  Graph& g = *parts[0].graph();
  const auto cols = parts[0].cols();
  Eigen::Index rows = 0;
  bool needs = false;
  std::vector<std::size_t> ids;
  for (const auto& p : parts) {
    check_shape(p.cols() == cols && p.graph() == &g, "concat_rows");
    rows += p.rows();
    needs = needs || g.needs_grad(p.id());
    ids.push_back(p.id());
  }
  Matrix out(rows, cols);
  Eigen::Index off = 0;
  for (const auto& p : parts) {
    out.middleRows(off, p.rows()) = p.value();
    off += p.rows();
  }
  return g.push(std::move(out), needs, [ids = std::move(ids)](Graph& g, const Matrix& d) {
    Eigen::Index off = 0;
    for (auto id : ids) {
      const auto r = g.value(id).rows();
      if (g.needs_grad(id)) g.grad(id) += d.middleRows(off, r);
      off += r;
    }
  });
}

Var embedding(Var table, std::span<const int> ids) {
  Graph& g = *table.graph();
  const auto& t = table.value();
  Matrix out(static_cast<Eigen::Index>(ids.size()), t.cols());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    check_shape(ids[i] >= 0 && ids[i] < t.rows(), "embedding");
    out.row(static_cast<Eigen::Index>(i)) = t.row(ids[i]);
  }
  const auto it = table.id();
  std::vector<int> idv(ids.begin(), ids.end());
  return g.push(std::move(out), g.needs_grad(it), [it, idv = std::move(idv)](Graph& g, const Matrix& d) {
    auto& gt = g.grad(it);
    for (std::size_t i = 0; i < idv.size(); ++i) gt.row(idv[i]) += d.row(static_cast<Eigen::Index>(i));
  });
}

Var blend_rows(std::span<const double> mask, Var a, Var b) {
  check_same_graph(a, b);
  check_shape(a.rows() == b.rows() && a.cols() == b.cols() &&
                  static_cast<Eigen::Index>(mask.size()) == a.rows(),
              "blend_rows");
  Graph& g = *a.graph();
  const Eigen::Map<const Eigen::VectorXd> m(mask.data(), static_cast<Eigen::Index>(mask.size()));
  Matrix out = (a.value().array().colwise() * m.array() +
                b.value().array().colwise() * (1.0 - m.array()))
                   .matrix();
  const auto ia = a.id(), ib = b.id();
  Eigen::VectorXd mv = m;
  return g.push(std::move(out), g.needs_grad(ia) || g.needs_grad(ib),
                [ia, ib, mv = std::move(mv)](Graph& g, const Matrix& d) {
                  if (g.needs_grad(ia)) g.grad(ia).array() += d.array().colwise() * mv.array();
                  if (g.needs_grad(ib)) g.grad(ib).array() += d.array().colwise() * (1.0 - mv.array());
                });
}

Var gru_cell(Var gx, Eigen::Index row, Var h, Var w_hh, Var b_hh, std::span<const double> mask) {
  check_same_graph(gx, h);
  check_same_graph(h, w_hh);
  check_same_graph(w_hh, b_hh);
  const Eigen::Index B = h.rows(), H = h.cols();
  check_shape(gx.cols() == 3 * H && row >= 0 && row + B <= gx.rows() && w_hh.rows() == H &&
                  w_hh.cols() == 3 * H && b_hh.rows() == 1 && b_hh.cols() == 3 * H &&
                  (mask.empty() || static_cast<Eigen::Index>(mask.size()) == B),
              "gru_cell");
  Graph& g = *gx.graph();
  Matrix gh = h.value() * w_hh.value();
  gh.rowwise() += b_hh.value().row(0);
  const auto x = gx.value().middleRows(row, B);
  Matrix r = (1.0 + (-(x.leftCols(H) + gh.leftCols(H)).array()).exp()).inverse().matrix();
  Matrix z = (1.0 + (-(x.middleCols(H, H) + gh.middleCols(H, H)).array()).exp()).inverse().matrix();
  Matrix ghn = gh.rightCols(H);
  Matrix n = (x.rightCols(H).array() + r.array() * ghn.array()).tanh().matrix();
  Matrix out = (n.array() + z.array() * (h.value().array() - n.array())).matrix();
  Eigen::VectorXd m;
  if (!mask.empty()) {
    m = Eigen::Map<const Eigen::VectorXd>(mask.data(), B);
    out = (out.array().colwise() * m.array() + h.value().array().colwise() * (1.0 - m.array())).matrix();
  }
  const auto ix = gx.id(), ih = h.id(), iw = w_hh.id(), ib = b_hh.id();
  const bool needs = g.needs_grad(ix) || g.needs_grad(ih) || g.needs_grad(iw) || g.needs_grad(ib);
  return g.push(std::move(out), needs,
                [ix, ih, iw, ib, row, B, H, r = std::move(r), z = std::move(z), n = std::move(n),
                 ghn = std::move(ghn), m = std::move(m)](Graph& g, const Matrix& d_out) {
                  const Matrix& hv = g.value(ih);
                  Matrix d = d_out;
                  Matrix dh;
                  if (m.size() != 0) {
                    dh = (d_out.array().colwise() * (1.0 - m.array())).matrix();
                    d = (d_out.array().colwise() * m.array()).matrix();
                  } else {
                    dh = Matrix::Zero(B, H);
                  }
                  dh.array() += d.array() * z.array();
                  const Matrix dan = (d.array() * (1.0 - z.array()) * (1.0 - n.array().square())).matrix();
                  const Matrix daz = (d.array() * (hv.array() - n.array()) * z.array() * (1.0 - z.array())).matrix();
                  const Matrix dar = (dan.array() * ghn.array() * r.array() * (1.0 - r.array())).matrix();
                  Matrix dgh(B, 3 * H);
                  dgh << dar, daz, (dan.array() * r.array()).matrix();
                  if (g.needs_grad(ix)) {
                    auto gxg = g.grad(ix).middleRows(row, B);
                    gxg.leftCols(H) += dar;
                    gxg.middleCols(H, H) += daz;
                    gxg.rightCols(H) += dan;
                  }
                  if (g.needs_grad(iw)) g.grad(iw).noalias() += hv.transpose() * dgh;
                  if (g.needs_grad(ib)) g.grad(ib) += dgh.colwise().sum();
                  if (g.needs_grad(ih)) {
                    dh.noalias() += dgh * g.value(iw).transpose();
                    g.grad(ih) += dh;
                  }
                });
}

Var mul_constant(Var a, const Matrix& c) {
  check_shape(a.rows() == c.rows() && a.cols() == c.cols(), "mul_constant");
  Graph& g = *a.graph();
  const auto ia = a.id();
  return g.push(a.value().cwiseProduct(c), g.needs_grad(ia),
                [ia, c](Graph& g, const Matrix& d) { g.grad(ia) += d.cwiseProduct(c); });
}

Var sum(std::span<const Var> scalars) {
  check_shape(!scalars.empty(), "sum");
  Graph& g = *scalars[0].graph();
  Matrix out = Matrix::Zero(1, 1);
  bool needs = false;
  std::vector<std::size_t> ids;
  for (const auto& s : scalars) {
    check_shape(s.rows() == 1 && s.cols() == 1, "sum");
    out(0, 0) += s.value()(0, 0);
    needs = needs || g.needs_grad(s.id());
    ids.push_back(s.id());
  }
  return g.push(std::move(out), needs, [ids = std::move(ids)](Graph& g, const Matrix& d) {
    for (auto id : ids)
      if (g.needs_grad(id)) g.grad(id)(0, 0) += d(0, 0);
  });
}

Var pointwise_conv(Var x, Var weight, Var bias, Eigen::Index pixels) {
  Graph& g = *x.graph();
  const auto in = weight.cols(), out_ch = weight.rows();
  check_shape(x.cols() == in * pixels && bias.rows() == 1 && bias.cols() == out_ch, "pointwise_conv");
  const auto n = x.rows();
  Matrix out(n, out_ch * pixels);
  using RowMap = Eigen::Map<Matrix>;
  using ConstRowMap = Eigen::Map<const Matrix>;
  const Eigen::VectorXd b = bias.value().row(0).transpose();
  for (Eigen::Index i = 0; i < n; ++i) {
    ConstRowMap xi(x.value().row(i).data(), in, pixels);
    RowMap yi(out.row(i).data(), out_ch, pixels);
    yi.noalias() = weight.value() * xi;
    yi.colwise() += b;
  }
  const auto ix = x.id(), iw = weight.id(), ib = bias.id();
  const bool needs = g.needs_grad(ix) || g.needs_grad(iw) || g.needs_grad(ib);
  return g.push(std::move(out), needs, [ix, iw, ib, in, out_ch, pixels](Graph& g, const Matrix& d) {
    const auto& xv = g.value(ix);
    const auto& wv = g.value(iw);
    for (Eigen::Index i = 0; i < xv.rows(); ++i) {
      ConstRowMap di(d.row(i).data(), out_ch, pixels);
      ConstRowMap xi(xv.row(i).data(), in, pixels);
      if (g.needs_grad(iw)) g.grad(iw).noalias() += di * xi.transpose();
      if (g.needs_grad(ib)) g.grad(ib).row(0) += di.rowwise().sum().transpose();
      if (g.needs_grad(ix)) {
        RowMap gx(g.grad(ix).row(i).data(), in, pixels);
        gx.noalias() += wv.transpose() * di;
      }
    }
  });
}

Var attention(Var query, std::span<const Var> memory, std::span<const int> lengths, Matrix* weights) {
  Graph& g = *query.graph();
  const auto rows = query.rows();
  const auto dim = query.cols();
  const auto steps = static_cast<Eigen::Index>(memory.size());
  check_shape(steps > 0 && static_cast<Eigen::Index>(lengths.size()) == rows, "attention");
  std::vector<std::size_t> mem_ids;
  bool needs = g.needs_grad(query.id());
  for (const auto& m : memory) {
    check_shape(m.rows() == rows && m.cols() == dim && m.graph() == &g, "attention");
    mem_ids.push_back(m.id());
    needs = needs || g.needs_grad(m.id());
  }
  Matrix scores(rows, steps);
  for (Eigen::Index t = 0; t < steps; ++t)
    scores.col(t) = memory[static_cast<std::size_t>(t)].value().cwiseProduct(query.value()).rowwise().sum();
  Matrix alpha = Matrix::Zero(rows, steps);
  for (Eigen::Index b = 0; b < rows; ++b) {
    const Eigen::Index len = lengths[static_cast<std::size_t>(b)];
    check_shape(len >= 1 && len <= steps, "attention lengths");
    const double mx = scores.row(b).head(len).maxCoeff();
    auto e = (scores.row(b).head(len).array() - mx).exp();
    alpha.row(b).head(len) = e / e.sum();
  }
  Matrix ctx = Matrix::Zero(rows, dim);
  for (Eigen::Index t = 0; t < steps; ++t)
    ctx.array() += memory[static_cast<std::size_t>(t)].value().array().colwise() * alpha.col(t).array();
  if (weights) *weights = alpha;
  const auto iq = query.id();
  return g.push(std::move(ctx), needs, [iq, mem_ids = std::move(mem_ids), alpha](Graph& g, const Matrix& d) {
    const auto steps = static_cast<Eigen::Index>(mem_ids.size());
    // d(alpha_t) = d . m_t ; d(score_t) = alpha_t (d(alpha_t) - sum_s alpha_s d(alpha_s))
    Matrix dalpha(alpha.rows(), steps);
    for (Eigen::Index t = 0; t < steps; ++t)
      dalpha.col(t) = g.value(mem_ids[static_cast<std::size_t>(t)]).cwiseProduct(d).rowwise().sum();
    const Eigen::VectorXd mean = alpha.cwiseProduct(dalpha).rowwise().sum();
    Matrix dscore = (alpha.array() * (dalpha.array().colwise() - mean.array())).matrix();
    const Matrix q = g.value(iq);
    for (Eigen::Index t = 0; t < steps; ++t) {
      const auto id = mem_ids[static_cast<std::size_t>(t)];
      if (g.needs_grad(iq))
        g.grad(iq).array() += g.value(id).array().colwise() * dscore.col(t).array();
      if (g.needs_grad(id)) {
        auto& gm = g.grad(id);
        gm.array() += d.array().colwise() * alpha.col(t).array();
        gm.array() += q.array().colwise() * dscore.col(t).array();
      }
    }
  });
}

Var masked_mean(std::span<const Var> memory, std::span<const int> lengths) {
  check_shape(!memory.empty(), "masked_mean");
  Graph& g = *memory[0].graph();
  const auto rows = memory[0].rows();
  const auto steps = static_cast<Eigen::Index>(memory.size());
  check_shape(static_cast<Eigen::Index>(lengths.size()) == rows, "masked_mean");
  Matrix w = Matrix::Zero(rows, steps);
  for (Eigen::Index b = 0; b < rows; ++b) {
    const Eigen::Index len = lengths[static_cast<std::size_t>(b)];
    check_shape(len >= 1 && len <= steps, "masked_mean lengths");
    w.row(b).head(len).setConstant(1.0 / static_cast<double>(len));
  }
  Matrix out = Matrix::Zero(rows, memory[0].cols());
  std::vector<std::size_t> ids;
  bool needs = false;
  for (Eigen::Index t = 0; t < steps; ++t) {
    const auto& m = memory[static_cast<std::size_t>(t)];
    out.array() += m.value().array().colwise() * w.col(t).array();
    ids.push_back(m.id());
    needs = needs || g.needs_grad(m.id());
  }
  return g.push(std::move(out), needs, [ids = std::move(ids), w](Graph& g, const Matrix& d) {
    for (std::size_t t = 0; t < ids.size(); ++t)
      if (g.needs_grad(ids[t]))
        g.grad(ids[t]).array() += d.array().colwise() * w.col(static_cast<Eigen::Index>(t)).array();
  });
}

Eigen::VectorXd log_softmax(const Eigen::Ref<const Eigen::RowVectorXd>& logits) {
  const double mx = logits.maxCoeff();
  const double lse = mx + std::log((logits.array() - mx).exp().sum());
  return (logits.array() - lse).matrix().transpose();
}

Var cross_entropy(Var logits, std::span<const int> targets, int ignore_id, long* correct) {
  Graph& g = *logits.graph();
  const auto& z = logits.value();
  check_shape(static_cast<Eigen::Index>(targets.size()) == z.rows(), "cross_entropy");
  Matrix probs = Matrix::Zero(z.rows(), z.cols());
  double loss = 0.0;
  for (Eigen::Index r = 0; r < z.rows(); ++r) {
    const int t = targets[static_cast<std::size_t>(r)];
    if (t == ignore_id) continue;
    check_shape(t >= 0 && t < z.cols(), "cross_entropy target");
    const double mx = z.row(r).maxCoeff();
    const auto e = (z.row(r).array() - mx).exp();
    const double s = e.sum();
    probs.row(r) = e / s;
    loss += -(z(r, t) - mx - std::log(s));
    if (correct) {
      Eigen::Index arg = 0;
      z.row(r).maxCoeff(&arg);
      if (arg == t) ++*correct;
    }
  }
  Matrix out(1, 1);
  out(0, 0) = loss;
  const auto iz = logits.id();
  std::vector<int> tv(targets.begin(), targets.end());
  return g.push(std::move(out), g.needs_grad(iz),
                [iz, probs = std::move(probs), tv = std::move(tv), ignore_id](Graph& g, const Matrix& d) {
                  auto& gz = g.grad(iz);
                  for (Eigen::Index r = 0; r < probs.rows(); ++r) {
                    const int t = tv[static_cast<std::size_t>(r)];
                    if (t == ignore_id) continue;
                    gz.row(r) += d(0, 0) * probs.row(r);
                    gz(r, t) -= d(0, 0);
                  }
                });
}

}  // namespace actsum::ad
