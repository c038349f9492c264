#pragma once

#include "ssg/gradcheck.hpp"
#include "ssg/optim.hpp"
#include "ssg/tape.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace ssg {

struct EncoderConfig {
    int d = 64;   // embedding dim
    int tnet_h1 = 32;
    int tnet_h2 = 64;
    int tnet_h3 = 32;
    int enc_h1 = 64;
    int enc_h2 = 128;
};

// Parameters under "enc." prefix. The final T-Net layer is zero-initialized
// and an identity is added, so A == I exactly at step 0.
void init_encoder_params(ParameterStore& store, const EncoderConfig& cfg, Rng& rng);

// points: constant leaf, K x 3. Returns the predicted 3x3 alignment matrix.
Var tnet_forward(Tape& tape, Var points, TapeBinding& bind, const EncoderConfig& cfg);

// || I - A A^T ||_F^2
Var reg_loss(Tape& tape, Var a);

struct EncodedObject {
    Var embedding;   // unit d-vector
    Var tnet_matrix; // 3x3
};

EncodedObject encode_object(Tape& tape, const Tensor& points, TapeBinding& bind, const EncoderConfig& cfg);
EncodedObject encode_object(Tape& tape, const Tensor& points, const ParamFn& p, const EncoderConfig& cfg);

// Plain data-path embedding (no tape); used when the encoder is frozen.
Tensor encode_object_data(const Tensor& points, const ParameterStore& store, const EncoderConfig& cfg);

// ---------------------------------------------------------------------------
// Synthetic stand-in for the frozen CLIP features: one fixed unit prototype
// per class, per-instance image vectors = prototype + Gaussian noise,
// renormalized. Deterministic per seed.
// ---------------------------------------------------------------------------
class SyntheticModalProvider {
public:
    SyntheticModalProvider(int n_obj, int d, std::uint64_t seed, double noise);

    const Tensor& text() const { return text_; } // [n_obj, d]
    Tensor text_for(int label) const;
    // m in [1,4] image features, deterministic per (label, instance_uid)
    Tensor images_for(int label, std::uint64_t instance_uid) const;

    int n_obj() const { return n_obj_; }
    int dim() const { return d_; }

private:
    int n_obj_;
    int d_;
    double noise_;
    std::uint64_t seed_;
    Tensor text_;
};

// One contrastive batch. Anchors are unit embeddings living on the tape;
// modal features are constants.
struct ContrastiveBatch {
    std::vector<Var> anchors;
    std::vector<int> labels;
    std::vector<Tensor> images; // per anchor, [m_i, d] unit rows
    Tensor text;                // [n_classes, d] unit rows
    double tau = 0.07;
};

// Decoupled losses: denominators run over negatives only. Anchors without a
// valid negative are skipped with a warning; the batch loss averages over
// contributing anchors (per modality).
Var visual_contrastive_loss(Tape& tape, const ContrastiveBatch& batch);
Var text_contrastive_loss(Tape& tape, const ContrastiveBatch& batch);
Var cross_modal_loss(Tape& tape, const ContrastiveBatch& batch);

// lambda_reg * sum(reg_loss) + lambda_cross * cross_modal
Var pretrain_loss(Tape& tape, const ContrastiveBatch& batch, const std::vector<Var>& tnet_matrices,
                  double lambda_reg = 1e-3, double lambda_cross = 1.0);

// Coupled variant: the positive term stays in the denominator.
Var coupled_text_loss_anchor(Tape& tape, const ContrastiveBatch& batch, int i);
Var coupled_text_loss(Tape& tape, const ContrastiveBatch& batch); // mean over anchors

// Negative-positive coupling multiplier q = N~ / (P~ + N~) of the coupled loss.
double npc_multiplier(const ContrastiveBatch& batch, const Tape& tape, int i);
// Closed form of -grad_{z_i} coupled_text_loss_anchor: (q/tau) (z_text - weighted negative mean).
Tensor npc_closed_form_neg_grad(const ContrastiveBatch& batch, const Tape& tape, int i);

// Class-prototype variant, algebraically a softmax cross-entropy over
// similarity logits.
Var ce_like_loss_anchor(Tape& tape, const ContrastiveBatch& batch, int i);
Var ce_like_loss(Tape& tape, const ContrastiveBatch& batch);
double ce_like_multiplier(const ContrastiveBatch& batch, const Tape& tape, int i);

} // namespace ssg
