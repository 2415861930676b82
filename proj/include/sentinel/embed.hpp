#pragma once

#include <random>
#include <stdexcept>

#include <Eigen/Dense>

#include "sentinel/tokenizer.hpp"

namespace sentinel {

template <class T>
using MatX = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>;
template <class T>
using VecX = Eigen::Matrix<T, Eigen::Dynamic, 1>;

// A token's input vector is the sum of three lookups: who the token is,
// where its node sits in the binarized tree, and what role the grammar
// assigns it. Tree position is the sum of one entry per step of the
// root-to-node path, so the supported depth is independent of the embedding
// dimension; the root is the empty sum.
template <class T>
struct EmbeddingTables {
    MatX<T> token;  // vocab_size x d_model
    MatX<T> role;   // kContextRoleCount x d_model
    MatX<T> step;   // 2*max_depth x d_model; row 2*(i-1)+b for step i, action b
    VecX<T> bos;    // stands in for the empty context

    int d_model() const { return static_cast<int>(token.cols()); }
    int max_depth() const { return static_cast<int>(step.rows() / 2); }

    static EmbeddingTables zeros(int vocab_size, int d_model, int max_depth) {
        EmbeddingTables t;
        t.token = MatX<T>::Zero(vocab_size, d_model);
        t.role = MatX<T>::Zero(static_cast<int>(kContextRoleCount), d_model);
        t.step = MatX<T>::Zero(2 * max_depth, d_model);
        t.bos = VecX<T>::Zero(d_model);
        return t;
    }
};

inline int step_row(int step_index, bool right) { // step_index counts from 0
    return 2 * step_index + (right ? 1 : 0);
}

template <class T>
VecX<T> tree_position_embedding(const TreePath& path, const EmbeddingTables<T>& tables) {
    if (path.length > tables.max_depth())
        throw std::out_of_range("tree path length " + std::to_string(path.length) +
                                " exceeds table depth " +
                                std::to_string(tables.max_depth()));
    VecX<T> sum = VecX<T>::Zero(tables.d_model());
    for (std::uint8_t i = 0; i < path.length; ++i)
        sum += tables.step.row(step_row(i, path.right_at(i))).transpose();
    return sum;
}

template <class T>
VecX<T> local_embedding(TokenId token_id, const TreePath& path, ContextRole role,
                        const EmbeddingTables<T>& tables) {
    if (token_id < 0 || token_id >= tables.token.rows())
        throw std::out_of_range("token id " + std::to_string(token_id) +
                                " outside vocabulary of " +
                                std::to_string(tables.token.rows()));
    return tables.token.row(token_id).transpose() + tree_position_embedding(path, tables) +
           tables.role.row(static_cast<int>(role)).transpose();
}

template <class T>
EmbeddingTables<T> init_embedding_tables(int vocab_size, int d_model, int max_depth,
                                         std::mt19937_64& rng, T std_dev = T(0.02)) {
    EmbeddingTables<T> t = EmbeddingTables<T>::zeros(vocab_size, d_model, max_depth);
    std::normal_distribution<double> dist(0.0, static_cast<double>(std_dev));
    auto fill = [&](MatX<T>& m) {
        for (Eigen::Index i = 0; i < m.rows(); ++i)
            for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = static_cast<T>(dist(rng));
    };
    fill(t.token);
    fill(t.role);
    fill(t.step);
    for (Eigen::Index j = 0; j < t.bos.size(); ++j) t.bos(j) = static_cast<T>(dist(rng));
    return t;
}

}  // namespace sentinel
