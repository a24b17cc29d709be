#pragma once

#include <cstddef>
#include <random>
#include <vector>

#include "mtseq/tape.hpp"

// Differentiable primitives. Every function records one node on the tape of
// its operands and registers the matching vector-Jacobian product.
namespace mtseq::ops {

enum class Axis { rows, cols };

Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, double k);
// m[N x D] + v[D] added to every row.
Var add_row_broadcast(Var m, Var v);

// [M x K] x [K x N] -> [M x N]; a rank-1 right operand [K] gives [M].
Var matmul(Var a, Var b);
Var transpose(Var a);

Var tanh(Var a);
Var sigmoid(Var a);
Var log(Var a);

// Vectors concatenate end to end (axis must be rows). Matrices concatenate
// along the named axis.
Var concat(const std::vector<Var>& parts, Axis axis = Axis::rows);
// Equal-length vectors become the rows of a matrix.
Var stack_rows(const std::vector<Var>& rows);
// Row `index` of a matrix as a vector (embedding lookup).
Var pick_row(Var m, std::size_t index);
Var slice(Var v, std::size_t offset, std::size_t length);

// Inverted dropout: surviving entries are scaled by 1/keep so inference
// needs no rescaling. rate == 0 returns the input unchanged.
Var dropout(Var a, double rate, std::mt19937_64& rng);

Var softmax_temperature(Var z, double temperature);
Var log_softmax(Var z);
// Scalar entry of a vector.
Var pick(Var v, std::size_t index);
// -log p[index] for a vector of log-probabilities.
Var nll_pick(Var log_probs, std::size_t index);

Var sum(Var a);
Var sum_scalars(const std::vector<Var>& scalars);
Var frobenius_norm_sq(Var a);

}  // namespace mtseq::ops
