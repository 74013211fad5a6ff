#include "scdiff/tape.hpp"

#include <cmath>
#include <utility>

#include "scdiff/error.hpp"

namespace scdiff {

Tape::NodeId Tape::leaf(Matrix value) {
    Node n;
    n.op = Op::leaf;
    n.value = std::move(value);
    return push(std::move(n));
}

Tape::NodeId Tape::add(NodeId a, NodeId b) {
    Node n;
    n.op = Op::add;
    n.a = a;
    n.b = b;
    n.value = scdiff::add(nodes_[a].value, nodes_[b].value);
    return push(std::move(n));
}

Tape::NodeId Tape::sub(NodeId a, NodeId b) {
    Node n;
    n.op = Op::sub;
    n.a = a;
    n.b = b;
    n.value = scdiff::sub(nodes_[a].value, nodes_[b].value);
    return push(std::move(n));
}

Tape::NodeId Tape::hadamard(NodeId a, NodeId b) {
    Node n;
    n.op = Op::hadamard;
    n.a = a;
    n.b = b;
    n.value = scdiff::hadamard(nodes_[a].value, nodes_[b].value);
    return push(std::move(n));
}

Tape::NodeId Tape::matmul(NodeId a, NodeId b) {
    Node n;
    n.op = Op::matmul;
    n.a = a;
    n.b = b;
    n.value = scdiff::matmul(nodes_[a].value, nodes_[b].value);
    return push(std::move(n));
}

Tape::NodeId Tape::transpose(NodeId a) {
    Node n;
    n.op = Op::transpose;
    n.a = a;
    n.value = scdiff::transpose(nodes_[a].value);
    return push(std::move(n));
}

Tape::NodeId Tape::relu(NodeId a) {
    Node n;
    n.op = Op::relu;
    n.a = a;
    n.value = scdiff::relu(nodes_[a].value);
    return push(std::move(n));
}

Tape::NodeId Tape::softmax_columns(NodeId a) {
    Node n;
    n.op = Op::softmax_columns;
    n.a = a;
    n.value = scdiff::softmax_columns(nodes_[a].value);
    return push(std::move(n));
}

Tape::NodeId Tape::scale(NodeId a, double c) {
    Node n;
    n.op = Op::scale;
    n.a = a;
    n.c = c;
    n.value = scdiff::scale(nodes_[a].value, c);
    return push(std::move(n));
}

Tape::NodeId Tape::add_scalar(NodeId a, double c) {
    Node n;
    n.op = Op::add_scalar;
    n.a = a;
    n.c = c;
    n.value = scdiff::add_scalar(nodes_[a].value, c);
    return push(std::move(n));
}

Tape::NodeId Tape::broadcast_columns(NodeId a, int ncols) {
    const Matrix& v = nodes_[a].value;
    if (v.cols() != 1) throw ShapeError("broadcast_columns: input must be a column vector");
    Node n;
    n.op = Op::broadcast_columns;
    n.a = a;
    Matrix out(v.rows(), ncols);
    for (int i = 0; i < v.rows(); ++i)
        for (int j = 0; j < ncols; ++j) out(i, j) = v(i, 0);
    n.value = std::move(out);
    return push(std::move(n));
}

Tape::NodeId Tape::sum_all(NodeId a) {
    Node n;
    n.op = Op::sum_all;
    n.a = a;
    Matrix out(1, 1);
    out(0, 0) = scdiff::sum(nodes_[a].value);
    n.value = std::move(out);
    return push(std::move(n));
}

Tape::NodeId Tape::slice_rows(NodeId a, int r0, int r1) {
    const Matrix& v = nodes_[a].value;
    if (r0 < 0 || r1 > v.rows() || r0 >= r1) throw ShapeError("slice_rows: bad row range");
    Node n;
    n.op = Op::slice_rows;
    n.a = a;
    n.i0 = r0;
    n.i1 = r1;
    Matrix out(r1 - r0, v.cols());
    for (int i = r0; i < r1; ++i)
        for (int j = 0; j < v.cols(); ++j) out(i - r0, j) = v(i, j);
    n.value = std::move(out);
    return push(std::move(n));
}

Tape::NodeId Tape::vstack(NodeId a, NodeId b) {
    const Matrix& va = nodes_[a].value;
    const Matrix& vb = nodes_[b].value;
    if (va.cols() != vb.cols()) throw ShapeError("vstack: column counts differ");
    Node n;
    n.op = Op::vstack;
    n.a = a;
    n.b = b;
    Matrix out(va.rows() + vb.rows(), va.cols());
    for (int i = 0; i < va.rows(); ++i)
        for (int j = 0; j < va.cols(); ++j) out(i, j) = va(i, j);
    for (int i = 0; i < vb.rows(); ++i)
        for (int j = 0; j < vb.cols(); ++j) out(i + va.rows(), j) = vb(i, j);
    n.value = std::move(out);
    return push(std::move(n));
}

Tape::NodeId Tape::reshape(NodeId a, int rows, int cols) {
    const Matrix& v = nodes_[a].value;
    if (static_cast<size_t>(rows) * cols != v.size()) throw ShapeError("reshape: entry count changes");
    Node n;
    n.op = Op::reshape;
    n.a = a;
    n.i0 = rows;
    n.i1 = cols;
    Matrix out(rows, cols);
    for (size_t i = 0; i < v.size(); ++i) out.data()[i] = v.data()[i];
    n.value = std::move(out);
    return push(std::move(n));
}

void Tape::backward(NodeId loss) {
    if (loss < 0 || loss >= size()) throw ShapeError("backward: bad loss node");
    const Matrix& lv = nodes_[loss].value;
    if (lv.rows() != 1 || lv.cols() != 1) throw ShapeError("backward: loss must be 1x1");

    for (auto& n : nodes_) n.grad = Matrix(n.value.rows(), n.value.cols());
    nodes_[loss].grad(0, 0) = 1.0;

    for (int id = loss; id >= 0; --id) {
        Node& n = nodes_[id];
        const Matrix& g = n.grad;
        switch (n.op) {
            case Op::leaf:
                break;
            case Op::add: {
                Matrix& ga = nodes_[n.a].grad;
                Matrix& gb = nodes_[n.b].grad;
                for (size_t i = 0; i < g.size(); ++i) {
                    ga.data()[i] += g.data()[i];
                    gb.data()[i] += g.data()[i];
                }
                break;
            }
            case Op::sub: {
                Matrix& ga = nodes_[n.a].grad;
                Matrix& gb = nodes_[n.b].grad;
                for (size_t i = 0; i < g.size(); ++i) {
                    ga.data()[i] += g.data()[i];
                    gb.data()[i] -= g.data()[i];
                }
                break;
            }
            case Op::hadamard: {
                Matrix& ga = nodes_[n.a].grad;
                Matrix& gb = nodes_[n.b].grad;
                const Matrix& va = nodes_[n.a].value;
                const Matrix& vb = nodes_[n.b].value;
                for (size_t i = 0; i < g.size(); ++i) {
                    ga.data()[i] += g.data()[i] * vb.data()[i];
                    gb.data()[i] += g.data()[i] * va.data()[i];
                }
                break;
            }
            case Op::matmul: {
                // dA += G B^T, dB += A^T G
                const Matrix& va = nodes_[n.a].value;
                const Matrix& vb = nodes_[n.b].value;
                Matrix da = scdiff::matmul(g, scdiff::transpose(vb));
                Matrix db = scdiff::matmul(scdiff::transpose(va), g);
                Matrix& ga = nodes_[n.a].grad;
                Matrix& gb = nodes_[n.b].grad;
                for (size_t i = 0; i < da.size(); ++i) ga.data()[i] += da.data()[i];
                for (size_t i = 0; i < db.size(); ++i) gb.data()[i] += db.data()[i];
                break;
            }
            case Op::transpose: {
                Matrix& ga = nodes_[n.a].grad;
                for (int i = 0; i < g.rows(); ++i)
                    for (int j = 0; j < g.cols(); ++j) ga(j, i) += g(i, j);
                break;
            }
            case Op::relu: {
                // Subgradient at 0 is 0.
                Matrix& ga = nodes_[n.a].grad;
                const Matrix& va = nodes_[n.a].value;
                for (size_t i = 0; i < g.size(); ++i)
                    if (va.data()[i] > 0.0) ga.data()[i] += g.data()[i];
                break;
            }
            case Op::softmax_columns: {
                // dx = y * (g - <y, g>_col) per column
                Matrix& ga = nodes_[n.a].grad;
                const Matrix& y = n.value;
                for (int j = 0; j < y.cols(); ++j) {
                    double dot = 0.0;
                    for (int i = 0; i < y.rows(); ++i) dot += y(i, j) * g(i, j);
                    for (int i = 0; i < y.rows(); ++i) ga(i, j) += y(i, j) * (g(i, j) - dot);
                }
                break;
            }
            case Op::scale: {
                Matrix& ga = nodes_[n.a].grad;
                for (size_t i = 0; i < g.size(); ++i) ga.data()[i] += n.c * g.data()[i];
                break;
            }
            case Op::add_scalar: {
                Matrix& ga = nodes_[n.a].grad;
                for (size_t i = 0; i < g.size(); ++i) ga.data()[i] += g.data()[i];
                break;
            }
            case Op::broadcast_columns: {
                Matrix& ga = nodes_[n.a].grad;
                for (int i = 0; i < g.rows(); ++i) {
                    double s = 0.0;
                    for (int j = 0; j < g.cols(); ++j) s += g(i, j);
                    ga(i, 0) += s;
                }
                break;
            }
            case Op::sum_all: {
                Matrix& ga = nodes_[n.a].grad;
                const double s = g(0, 0);
                for (size_t i = 0; i < ga.size(); ++i) ga.data()[i] += s;
                break;
            }
            case Op::slice_rows: {
                Matrix& ga = nodes_[n.a].grad;
                for (int i = 0; i < g.rows(); ++i)
                    for (int j = 0; j < g.cols(); ++j) ga(i + n.i0, j) += g(i, j);
                break;
            }
            case Op::vstack: {
                Matrix& ga = nodes_[n.a].grad;
                Matrix& gb = nodes_[n.b].grad;
                const int ra = ga.rows();
                for (int i = 0; i < ga.rows(); ++i)
                    for (int j = 0; j < g.cols(); ++j) ga(i, j) += g(i, j);
                for (int i = 0; i < gb.rows(); ++i)
                    for (int j = 0; j < g.cols(); ++j) gb(i, j) += g(i + ra, j);
                break;
            }
            case Op::reshape: {
                Matrix& ga = nodes_[n.a].grad;
                for (size_t i = 0; i < g.size(); ++i) ga.data()[i] += g.data()[i];
                break;
            }
        }
    }
}

}  // namespace scdiff
