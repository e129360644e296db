#include "sgraf/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <unordered_set>

namespace sgraf {

std::string shape_to_string(const Shape& shape) {
    std::ostringstream os;
    os << "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) os << " x ";
        os << shape[i];
    }
    os << "]";
    return os.str();
}

Var make_op(Tensor out, std::vector<Var> inputs, std::function<void(Node&)> backward) {
    Var v;
    auto node = std::make_shared<Node>();
    node->value = std::move(out);
    node->is_leaf = false;
    for (const Var& in : inputs) {
        node->requires_grad = node->requires_grad || in.requires_grad();
        node->inputs.push_back(in.node());
    }
    if (node->requires_grad) node->backward = std::move(backward);
    v.node_ = std::move(node);
    return v;
}

namespace {

thread_local bool g_kink_active = false;
thread_local double g_kink_margin = std::numeric_limits<double>::infinity();

void add_all(const std::shared_ptr<Node>& n, const Tensor& delta) {
    if (!n->requires_grad) return;
    Tensor& g = n->ensure_grad();
    for (std::size_t i = 0; i < delta.size(); ++i) g[i] += delta[i];
}

}  // namespace

void KinkTrace::enable() { g_kink_active = true; }
void KinkTrace::disable() { g_kink_active = false; }
bool KinkTrace::active() { return g_kink_active; }
void KinkTrace::reset() { g_kink_margin = std::numeric_limits<double>::infinity(); }
void KinkTrace::note(double margin) {
    if (g_kink_active && margin < g_kink_margin) g_kink_margin = margin;
}
double KinkTrace::min_margin() { return g_kink_margin; }

void backward(const Var& root) {
    if (!root.defined()) throw ValueError("forward_backward: undefined root");
    if (!root.value().is_scalar()) {
        throw ShapeError("forward_backward: root must be a scalar, got shape " +
                         shape_to_string(root.shape()));
    }
    if (!root.requires_grad()) return;

    // Post-order over the subgraph that requires gradients, then reverse.
    std::vector<Node*> order;
    std::unordered_set<Node*> seen;
    std::vector<std::pair<Node*, std::size_t>> stack;
    stack.emplace_back(root.node().get(), 0);
    seen.insert(root.node().get());
    while (!stack.empty()) {
        auto& [node, next] = stack.back();
        if (next < node->inputs.size()) {
            Node* child = node->inputs[next++].get();
            if (child->requires_grad && !seen.count(child)) {
                seen.insert(child);
                stack.emplace_back(child, 0);
            }
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }

    root.node()->ensure_grad()[0] += 1.0;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Node* node = *it;
        if (node->backward && node->grad_ready) node->backward(*node);
    }
}

// -- elementwise ----------------------------------------------------------

Var add(const Var& a, const Var& b) {
    check_same_shape(a.value(), b.value(), "add");
    Tensor out = a.value();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += b.value()[i];
    return make_op(std::move(out), {a, b}, [na = a.node(), nb = b.node()](Node& self) {
        add_all(na, self.grad);
        if (nb->requires_grad) {
            Tensor& g = nb->ensure_grad();
            for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i];
        }
    });
}

Var sub(const Var& a, const Var& b) {
    check_same_shape(a.value(), b.value(), "sub");
    Tensor out = a.value();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] -= b.value()[i];
    return make_op(std::move(out), {a, b}, [na = a.node(), nb = b.node()](Node& self) {
        add_all(na, self.grad);
        if (nb->requires_grad) {
            Tensor& g = nb->ensure_grad();
            for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] -= self.grad[i];
        }
    });
}

Var mul(const Var& a, const Var& b) {
    check_same_shape(a.value(), b.value(), "mul");
    Tensor out = a.value();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] *= b.value()[i];
    return make_op(std::move(out), {a, b}, [na = a.node(), nb = b.node()](Node& self) {
        if (na->requires_grad) {
            Tensor& g = na->ensure_grad();
            for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i] * nb->value[i];
        }
        if (nb->requires_grad) {
            Tensor& g = nb->ensure_grad();
            for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i] * na->value[i];
        }
    });
}

Var neg(const Var& a) { return scale(a, -1.0); }

Var scale(const Var& a, double c) {
    Tensor out = a.value();
    for (double& x : out.data()) x *= c;
    return make_op(std::move(out), {a}, [na = a.node(), c](Node& self) {
        if (na->requires_grad) {
            Tensor& g = na->ensure_grad();
            for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += c * self.grad[i];
        }
    });
}

Var add_const(const Var& a, double c) {
    Tensor out = a.value();
    for (double& x : out.data()) x += c;
    return make_op(std::move(out), {a}, [na = a.node()](Node& self) { add_all(na, self.grad); });
}

Var add_rowwise(const Var& mat, const Var& vec) {
    if (mat.rank() != 2 || vec.rank() != 1 || mat.cols() != vec.value().size()) {
        throw ShapeError("add_rowwise: need [r x c] and [c], got " + shape_to_string(mat.shape()) +
                         " and " + shape_to_string(vec.shape()));
    }
    std::size_t r = mat.rows(), c = mat.cols();
    Tensor out = mat.value();
    for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) out.at(i, j) += vec.value()[j];
    return make_op(std::move(out), {mat, vec}, [nm = mat.node(), nv = vec.node(), r, c](Node& self) {
        add_all(nm, self.grad);
        if (nv->requires_grad) {
            Tensor& g = nv->ensure_grad();
            for (std::size_t i = 0; i < r; ++i)
                for (std::size_t j = 0; j < c; ++j) g[j] += self.grad.at(i, j);
        }
    });
}

Var add_scalar_var(const Var& a, const Var& s) {
    if (!s.value().is_scalar()) throw ShapeError("add_scalar_var: second operand must be rank 0");
    Tensor out = a.value();
    double sv = s.value()[0];
    for (double& x : out.data()) x += sv;
    return make_op(std::move(out), {a, s}, [na = a.node(), ns = s.node()](Node& self) {
        add_all(na, self.grad);
        if (ns->requires_grad) {
            double total = 0.0;
            for (std::size_t i = 0; i < self.grad.size(); ++i) total += self.grad[i];
            ns->ensure_grad()[0] += total;
        }
    });
}

Var square(const Var& a) {
    Tensor out = a.value();
    for (double& x : out.data()) x *= x;
    return make_op(std::move(out), {a}, [na = a.node()](Node& self) {
        if (na->requires_grad) {
            Tensor& g = na->ensure_grad();
            for (std::size_t i = 0; i < self.grad.size(); ++i)
                g[i] += 2.0 * na->value[i] * self.grad[i];
        }
    });
}

Var relu(const Var& a) {
    Tensor out = a.value();
    for (double& x : out.data()) {
        if (g_kink_active) KinkTrace::note(std::fabs(x));
        if (x < 0.0) x = 0.0;
    }
    return make_op(std::move(out), {a}, [na = a.node()](Node& self) {
        if (na->requires_grad) {
            Tensor& g = na->ensure_grad();
            // subgradient at 0 pinned to 0
            for (std::size_t i = 0; i < self.grad.size(); ++i)
                if (na->value[i] > 0.0) g[i] += self.grad[i];
        }
    });
}

namespace {
double stable_sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    double e = std::exp(x);
    return e / (1.0 + e);
}
}  // namespace

Var sigmoid(const Var& a) {
    Tensor out = a.value();
    for (double& x : out.data()) x = stable_sigmoid(x);
    return make_op(std::move(out), {a}, [na = a.node()](Node& self) {
        if (na->requires_grad) {
            Tensor& g = na->ensure_grad();
            for (std::size_t i = 0; i < self.grad.size(); ++i) {
                double y = self.value[i];
                g[i] += self.grad[i] * y * (1.0 - y);
            }
        }
    });
}

Var tanh(const Var& a) {
    Tensor out = a.value();
    for (double& x : out.data()) x = std::tanh(x);
    return make_op(std::move(out), {a}, [na = a.node()](Node& self) {
        if (na->requires_grad) {
            Tensor& g = na->ensure_grad();
            for (std::size_t i = 0; i < self.grad.size(); ++i) {
                double y = self.value[i];
                g[i] += self.grad[i] * (1.0 - y * y);
            }
        }
    });
}

Var div_by_scalar(const Var& a, const Var& s) {
    if (!s.value().is_scalar()) throw ShapeError("div_by_scalar: divisor must be rank 0");
    double sv = s.value()[0];
    Tensor out = a.value();
    for (double& x : out.data()) x /= sv;
    return make_op(std::move(out), {a, s}, [na = a.node(), ns = s.node(), sv](Node& self) {
        if (na->requires_grad) {
            Tensor& g = na->ensure_grad();
            for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i] / sv;
        }
        if (ns->requires_grad) {
            double total = 0.0;
            for (std::size_t i = 0; i < self.grad.size(); ++i)
                total += self.grad[i] * self.value[i];
            ns->ensure_grad()[0] -= total / sv;
        }
    });
}

// -- linear algebra -------------------------------------------------------

Var matmul(const Var& a, const Var& b) {
    const Tensor& A = a.value();
    const Tensor& B = b.value();
    if (A.rank() == 2 && B.rank() == 2) {
        if (A.cols() != B.rows())
            throw ShapeError("matmul: " + shape_to_string(A.shape()) + " x " + shape_to_string(B.shape()));
        std::size_t r = A.rows(), k = A.cols(), c = B.cols();
        Tensor out({r, c});
        for (std::size_t i = 0; i < r; ++i)
            for (std::size_t t = 0; t < k; ++t) {
                double av = A.at(i, t);
                if (av == 0.0) continue;
                for (std::size_t j = 0; j < c; ++j) out.at(i, j) += av * B.at(t, j);
            }
        return make_op(std::move(out), {a, b}, [na = a.node(), nb = b.node(), r, k, c](Node& self) {
            if (na->requires_grad) {
                Tensor& g = na->ensure_grad();
                for (std::size_t i = 0; i < r; ++i)
                    for (std::size_t j = 0; j < c; ++j) {
                        double gv = self.grad.at(i, j);
                        if (gv == 0.0) continue;
                        for (std::size_t t = 0; t < k; ++t) g.at(i, t) += gv * nb->value.at(t, j);
                    }
            }
            if (nb->requires_grad) {
                Tensor& g = nb->ensure_grad();
                for (std::size_t i = 0; i < r; ++i)
                    for (std::size_t t = 0; t < k; ++t) {
                        double av = na->value.at(i, t);
                        if (av == 0.0) continue;
                        for (std::size_t j = 0; j < c; ++j) g.at(t, j) += av * self.grad.at(i, j);
                    }
            }
        });
    }
    if (A.rank() == 2 && B.rank() == 1) {
        if (A.cols() != B.size())
            throw ShapeError("matmul: " + shape_to_string(A.shape()) + " x " + shape_to_string(B.shape()));
        std::size_t r = A.rows(), k = A.cols();
        Tensor out({r});
        for (std::size_t i = 0; i < r; ++i) {
            double acc = 0.0;
            for (std::size_t t = 0; t < k; ++t) acc += A.at(i, t) * B[t];
            out[i] = acc;
        }
        return make_op(std::move(out), {a, b}, [na = a.node(), nb = b.node(), r, k](Node& self) {
            if (na->requires_grad) {
                Tensor& g = na->ensure_grad();
                for (std::size_t i = 0; i < r; ++i)
                    for (std::size_t t = 0; t < k; ++t) g.at(i, t) += self.grad[i] * nb->value[t];
            }
            if (nb->requires_grad) {
                Tensor& g = nb->ensure_grad();
                for (std::size_t i = 0; i < r; ++i)
                    for (std::size_t t = 0; t < k; ++t) g[t] += na->value.at(i, t) * self.grad[i];
            }
        });
    }
    if (A.rank() == 1 && B.rank() == 2) {
        if (A.size() != B.rows())
            throw ShapeError("matmul: " + shape_to_string(A.shape()) + " x " + shape_to_string(B.shape()));
        std::size_t k = A.size(), c = B.cols();
        Tensor out({c});
        for (std::size_t t = 0; t < k; ++t) {
            double av = A[t];
            if (av == 0.0) continue;
            for (std::size_t j = 0; j < c; ++j) out[j] += av * B.at(t, j);
        }
        return make_op(std::move(out), {a, b}, [na = a.node(), nb = b.node(), k, c](Node& self) {
            if (na->requires_grad) {
                Tensor& g = na->ensure_grad();
                for (std::size_t t = 0; t < k; ++t)
                    for (std::size_t j = 0; j < c; ++j) g[t] += nb->value.at(t, j) * self.grad[j];
            }
            if (nb->requires_grad) {
                Tensor& g = nb->ensure_grad();
                for (std::size_t t = 0; t < k; ++t)
                    for (std::size_t j = 0; j < c; ++j) g.at(t, j) += na->value[t] * self.grad[j];
            }
        });
    }
    if (A.rank() == 1 && B.rank() == 1) {
        if (A.size() != B.size())
            throw ShapeError("dot: " + shape_to_string(A.shape()) + " x " + shape_to_string(B.shape()));
        double acc = 0.0;
        for (std::size_t i = 0; i < A.size(); ++i) acc += A[i] * B[i];
        return make_op(Tensor::scalar(acc), {a, b}, [na = a.node(), nb = b.node()](Node& self) {
            double g = self.grad[0];
            if (na->requires_grad) {
                Tensor& ga = na->ensure_grad();
                for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g * nb->value[i];
            }
            if (nb->requires_grad) {
                Tensor& gb = nb->ensure_grad();
                for (std::size_t i = 0; i < gb.size(); ++i) gb[i] += g * na->value[i];
            }
        });
    }
    throw ShapeError("matmul: unsupported ranks " + shape_to_string(A.shape()) + " x " +
                     shape_to_string(B.shape()));
}

Var dot(const Var& a, const Var& b) { return matmul(a, b); }

Var transpose(const Var& a) {
    if (a.rank() != 2) throw ShapeError("transpose: need rank 2, got " + shape_to_string(a.shape()));
    std::size_t r = a.rows(), c = a.cols();
    Tensor out({c, r});
    for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) out.at(j, i) = a.value().at(i, j);
    return make_op(std::move(out), {a}, [na = a.node(), r, c](Node& self) {
        if (na->requires_grad) {
            Tensor& g = na->ensure_grad();
            for (std::size_t i = 0; i < r; ++i)
                for (std::size_t j = 0; j < c; ++j) g.at(i, j) += self.grad.at(j, i);
        }
    });
}

// -- reductions -------------------------------------------------------------

Var sum_all(const Var& a) {
    double acc = 0.0;
    for (double x : a.value().data()) acc += x;
    return make_op(Tensor::scalar(acc), {a}, [na = a.node()](Node& self) {
        if (na->requires_grad) {
            Tensor& g = na->ensure_grad();
            double gv = self.grad[0];
            for (std::size_t i = 0; i < g.size(); ++i) g[i] += gv;
        }
    });
}

Var mean_all(const Var& a) {
    double acc = 0.0;
    for (double x : a.value().data()) acc += x;
    std::size_t n = a.value().size();
    return make_op(Tensor::scalar(acc / static_cast<double>(n)), {a}, [na = a.node(), n](Node& self) {
        if (na->requires_grad) {
            Tensor& g = na->ensure_grad();
            double gv = self.grad[0] / static_cast<double>(n);
            for (std::size_t i = 0; i < g.size(); ++i) g[i] += gv;
        }
    });
}

Var mean_axis0(const Var& a) {
    if (a.rank() != 2) throw ShapeError("mean_axis0: need rank 2, got " + shape_to_string(a.shape()));
    std::size_t r = a.rows(), c = a.cols();
    Tensor out({c});
    for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) out[j] += a.value().at(i, j);
    for (std::size_t j = 0; j < c; ++j) out[j] /= static_cast<double>(r);
    return make_op(std::move(out), {a}, [na = a.node(), r, c](Node& self) {
        if (na->requires_grad) {
            Tensor& g = na->ensure_grad();
            for (std::size_t i = 0; i < r; ++i)
                for (std::size_t j = 0; j < c; ++j)
                    g.at(i, j) += self.grad[j] / static_cast<double>(r);
        }
    });
}

Var sum_axis1(const Var& a) {
    if (a.rank() != 2) throw ShapeError("sum_axis1: need rank 2, got " + shape_to_string(a.shape()));
    std::size_t r = a.rows(), c = a.cols();
    Tensor out({r});
    for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) out[i] += a.value().at(i, j);
    return make_op(std::move(out), {a}, [na = a.node(), r, c](Node& self) {
        if (na->requires_grad) {
            Tensor& g = na->ensure_grad();
            for (std::size_t i = 0; i < r; ++i)
                for (std::size_t j = 0; j < c; ++j) g.at(i, j) += self.grad[i];
        }
    });
}

namespace {

// Strided view over one softmax/normalize slice.
struct SliceIter {
    std::size_t offset, stride, count;
    std::size_t index(std::size_t i) const { return offset + i * stride; }
};

std::vector<SliceIter> slices_of(const Tensor& t, int axis) {
    std::vector<SliceIter> slices;
    if (t.rank() <= 1) {
        slices.push_back({0, 1, t.size()});
        return slices;
    }
    std::size_t r = t.rows(), c = t.cols();
    if (axis == 1) {
        for (std::size_t i = 0; i < r; ++i) slices.push_back({i * c, 1, c});
    } else if (axis == 0) {
        for (std::size_t j = 0; j < c; ++j) slices.push_back({j, c, r});
    } else {
        throw ShapeError("axis must be 0 or 1");
    }
    return slices;
}

}  // namespace

Var softmax(const Var& a, int axis) {
    Tensor out = a.value();
    auto slices = slices_of(out, axis);
    for (const SliceIter& s : slices) {
        double mx = -std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < s.count; ++i) mx = std::max(mx, out[s.index(i)]);
        double denom = 0.0;
        for (std::size_t i = 0; i < s.count; ++i) {
            double e = std::exp(out[s.index(i)] - mx);
            out[s.index(i)] = e;
            denom += e;
        }
        for (std::size_t i = 0; i < s.count; ++i) out[s.index(i)] /= denom;
    }
    return make_op(std::move(out), {a}, [na = a.node(), axis](Node& self) {
        if (!na->requires_grad) return;
        Tensor& g = na->ensure_grad();
        auto slices = slices_of(self.value, axis);
        for (const SliceIter& s : slices) {
            double inner = 0.0;
            for (std::size_t i = 0; i < s.count; ++i)
                inner += self.grad[s.index(i)] * self.value[s.index(i)];
            for (std::size_t i = 0; i < s.count; ++i) {
                std::size_t k = s.index(i);
                g[k] += self.value[k] * (self.grad[k] - inner);
            }
        }
    });
}

Var l2_normalize(const Var& a, int axis, double eps) {
    Tensor out = a.value();
    auto slices = slices_of(out, axis);
    std::vector<double> norms(slices.size());
    for (std::size_t si = 0; si < slices.size(); ++si) {
        const SliceIter& s = slices[si];
        double sq = 0.0;
        for (std::size_t i = 0; i < s.count; ++i) {
            double x = out[s.index(i)];
            sq += x * x;
        }
        double n = std::sqrt(sq);
        norms[si] = n;
        if (g_kink_active) KinkTrace::note(std::fabs(n - eps));
        double denom = std::max(n, eps);
        for (std::size_t i = 0; i < s.count; ++i) out[s.index(i)] /= denom;
    }
    return make_op(std::move(out), {a},
                   [na = a.node(), axis, eps, norms = std::move(norms)](Node& self) {
        if (!na->requires_grad) return;
        Tensor& g = na->ensure_grad();
        auto slices = slices_of(self.value, axis);
        for (std::size_t si = 0; si < slices.size(); ++si) {
            const SliceIter& s = slices[si];
            double n = norms[si];
            if (n > eps) {
                double inner = 0.0;
                for (std::size_t i = 0; i < s.count; ++i)
                    inner += self.grad[s.index(i)] * self.value[s.index(i)];
                for (std::size_t i = 0; i < s.count; ++i) {
                    std::size_t k = s.index(i);
                    g[k] += (self.grad[k] - self.value[k] * inner) / n;
                }
            } else {
                for (std::size_t i = 0; i < s.count; ++i) {
                    std::size_t k = s.index(i);
                    g[k] += self.grad[k] / eps;
                }
            }
        }
    });
}

// -- shape manipulation -------------------------------------------------------

Var reshape(const Var& a, Shape shape) {
    if (shape_size(shape) != a.value().size()) {
        throw ShapeError("reshape: cannot view " + shape_to_string(a.shape()) + " as " +
                         shape_to_string(shape));
    }
    Tensor out(std::move(shape), a.value().data());
    return make_op(std::move(out), {a}, [na = a.node()](Node& self) {
        if (na->requires_grad) {
            Tensor& g = na->ensure_grad();
            for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
        }
    });
}

Var concat_rows(const std::vector<Var>& parts) {
    if (parts.empty()) throw ShapeError("concat_rows: no parts");
    std::size_t c = parts[0].rank() == 1 ? parts[0].value().size() : parts[0].cols();
    std::size_t total = 0;
    for (const Var& p : parts) {
        std::size_t pc = p.rank() == 1 ? p.value().size() : p.cols();
        if (p.rank() > 2 || pc != c)
            throw ShapeError("concat_rows: incompatible part shape " + shape_to_string(p.shape()));
        total += p.rank() == 1 ? 1 : p.rows();
    }
    Tensor out({total, c});
    std::vector<std::size_t> offsets;
    std::size_t at = 0;
    for (const Var& p : parts) {
        offsets.push_back(at);
        const Tensor& v = p.value();
        for (std::size_t i = 0; i < v.size(); ++i) out[at * c + i] = v[i];
        at += p.rank() == 1 ? 1 : p.rows();
    }
    std::vector<Var> inputs = parts;
    return make_op(std::move(out), std::move(inputs),
                   [parts, offsets = std::move(offsets), c](Node& self) {
        for (std::size_t pi = 0; pi < parts.size(); ++pi) {
            auto np = parts[pi].node();
            if (!np->requires_grad) continue;
            Tensor& g = np->ensure_grad();
            std::size_t base = offsets[pi] * c;
            for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[base + i];
        }
    });
}

Var stack_scalars(const std::vector<Var>& parts) {
    if (parts.empty()) throw ShapeError("stack_scalars: no parts");
    Tensor out({parts.size()});
    for (std::size_t i = 0; i < parts.size(); ++i) {
        if (!parts[i].value().is_scalar()) throw ShapeError("stack_scalars: part is not rank 0");
        out[i] = parts[i].value()[0];
    }
    std::vector<Var> inputs = parts;
    return make_op(std::move(out), std::move(inputs), [parts](Node& self) {
        for (std::size_t i = 0; i < parts.size(); ++i) {
            auto np = parts[i].node();
            if (np->requires_grad) np->ensure_grad()[0] += self.grad[i];
        }
    });
}

Var slice_rows(const Var& a, std::size_t offset, std::size_t count) {
    if (a.rank() != 2) throw ShapeError("slice_rows: need rank 2");
    std::size_t r = a.rows(), c = a.cols();
    if (offset + count > r) throw ShapeError("slice_rows: range out of bounds");
    Tensor out({count, c});
    for (std::size_t i = 0; i < count; ++i)
        for (std::size_t j = 0; j < c; ++j) out.at(i, j) = a.value().at(offset + i, j);
    return make_op(std::move(out), {a}, [na = a.node(), offset, count, c](Node& self) {
        if (na->requires_grad) {
            Tensor& g = na->ensure_grad();
            for (std::size_t i = 0; i < count; ++i)
                for (std::size_t j = 0; j < c; ++j) g.at(offset + i, j) += self.grad.at(i, j);
        }
    });
}

Var row(const Var& a, std::size_t i) {
    if (a.rank() != 2 || i >= a.rows()) throw ShapeError("row: index out of range");
    std::size_t c = a.cols();
    Tensor out({c});
    for (std::size_t j = 0; j < c; ++j) out[j] = a.value().at(i, j);
    return make_op(std::move(out), {a}, [na = a.node(), i, c](Node& self) {
        if (na->requires_grad) {
            Tensor& g = na->ensure_grad();
            for (std::size_t j = 0; j < c; ++j) g.at(i, j) += self.grad[j];
        }
    });
}

Var pick(const Var& a, std::size_t i, std::size_t j) {
    if (a.rank() != 2 || i >= a.rows() || j >= a.cols()) throw ShapeError("pick: index out of range");
    return make_op(Tensor::scalar(a.value().at(i, j)), {a}, [na = a.node(), i, j](Node& self) {
        if (na->requires_grad) na->ensure_grad().at(i, j) += self.grad[0];
    });
}

Var pick1(const Var& a, std::size_t i) {
    if (a.rank() != 1 || i >= a.value().size()) throw ShapeError("pick1: index out of range");
    return make_op(Tensor::scalar(a.value()[i]), {a}, [na = a.node(), i](Node& self) {
        if (na->requires_grad) na->ensure_grad()[i] += self.grad[0];
    });
}

Var embedding_lookup(const Var& table, const std::vector<int>& ids, std::optional<int> unk_row) {
    if (table.rank() != 2) throw ShapeError("embedding_lookup: table must be rank 2");
    std::size_t vocab = table.rows(), width = table.cols();
    std::vector<std::size_t> rows(ids.size());
    for (std::size_t i = 0; i < ids.size(); ++i) {
        int id = ids[i];
        if (id < 0 || static_cast<std::size_t>(id) >= vocab) {
            if (!unk_row) throw ValueError("embedding_lookup: token id " + std::to_string(id) +
                                           " out of range and no unknown row configured");
            id = *unk_row;
            if (id < 0 || static_cast<std::size_t>(id) >= vocab)
                throw ValueError("embedding_lookup: unknown row out of range");
        }
        rows[i] = static_cast<std::size_t>(id);
    }
    Tensor out({ids.size(), width});
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t j = 0; j < width; ++j) out.at(i, j) = table.value().at(rows[i], j);
    return make_op(std::move(out), {table}, [nt = table.node(), rows = std::move(rows), width](Node& self) {
        if (nt->requires_grad) {
            Tensor& g = nt->ensure_grad();
            for (std::size_t i = 0; i < rows.size(); ++i)
                for (std::size_t j = 0; j < width; ++j) g.at(rows[i], j) += self.grad.at(i, j);
        }
    });
}

// -- batch normalization ------------------------------------------------------

Var batch_norm(const Var& x, const Var& gamma, const Var& beta, BatchNormState& state, BnMode mode) {
    if (x.rank() != 2 || x.cols() != state.channels) {
        throw ShapeError("batch_norm: expected [n x " + std::to_string(state.channels) +
                         "], got " + shape_to_string(x.shape()));
    }
    if (gamma.value().size() != state.channels || beta.value().size() != state.channels)
        throw ShapeError("batch_norm: affine parameter shape mismatch");
    std::size_t n = x.rows(), c = state.channels;

    std::vector<double> mean(c), invstd(c);
    if (mode == BnMode::Training) {
        if (n < 2) throw ValueError("batch_norm: training mode requires at least 2 samples");
        for (std::size_t j = 0; j < c; ++j) {
            double mu = 0.0;
            for (std::size_t i = 0; i < n; ++i) mu += x.value().at(i, j);
            mu /= static_cast<double>(n);
            double var = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                double d = x.value().at(i, j) - mu;
                var += d * d;
            }
            var /= static_cast<double>(n);  // population variance
            mean[j] = mu;
            invstd[j] = 1.0 / std::sqrt(var + state.epsilon);
            state.running_mean[j] = (1.0 - state.momentum) * state.running_mean[j] + state.momentum * mu;
            state.running_var[j] = (1.0 - state.momentum) * state.running_var[j] + state.momentum * var;
        }
    } else {
        for (std::size_t j = 0; j < c; ++j) {
            mean[j] = state.running_mean[j];
            invstd[j] = 1.0 / std::sqrt(state.running_var[j] + state.epsilon);
        }
    }

    Tensor xhat({n, c});
    Tensor out({n, c});
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < c; ++j) {
            double h = (x.value().at(i, j) - mean[j]) * invstd[j];
            xhat.at(i, j) = h;
            out.at(i, j) = gamma.value()[j] * h + beta.value()[j];
        }

    bool training = mode == BnMode::Training;
    return make_op(std::move(out), {x, gamma, beta},
                   [nx = x.node(), ng = gamma.node(), nb = beta.node(), xhat = std::move(xhat),
                    invstd = std::move(invstd), n, c, training](Node& self) {
        if (ng->requires_grad) {
            Tensor& g = ng->ensure_grad();
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = 0; j < c; ++j) g[j] += self.grad.at(i, j) * xhat.at(i, j);
        }
        if (nb->requires_grad) {
            Tensor& g = nb->ensure_grad();
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = 0; j < c; ++j) g[j] += self.grad.at(i, j);
        }
        if (!nx->requires_grad) return;
        Tensor& gx = nx->ensure_grad();
        for (std::size_t j = 0; j < c; ++j) {
            double gamma_j = ng->value[j];
            if (!training) {
                for (std::size_t i = 0; i < n; ++i)
                    gx.at(i, j) += self.grad.at(i, j) * gamma_j * invstd[j];
                continue;
            }
            // batch statistics depend on x
            double sum_dxhat = 0.0, sum_dxhat_xhat = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                double dxhat = self.grad.at(i, j) * gamma_j;
                sum_dxhat += dxhat;
                sum_dxhat_xhat += dxhat * xhat.at(i, j);
            }
            double dn = static_cast<double>(n);
            for (std::size_t i = 0; i < n; ++i) {
                double dxhat = self.grad.at(i, j) * gamma_j;
                gx.at(i, j) += invstd[j] * (dxhat - sum_dxhat / dn - xhat.at(i, j) * sum_dxhat_xhat / dn);
            }
        }
    });
}

}  // namespace sgraf
