#include "ssg/encoder.hpp"

#include <cmath>
#include <functional>
#include <iostream>
#include <stdexcept>

namespace ssg {

namespace {

Var tnet_impl(Tape& tape, Var points, const ParamFn& p, const EncoderConfig& cfg) {
    Var h = tape.relu(tape.linear(points, p("enc.tnet.w1"), p("enc.tnet.b1")));
    h = tape.relu(tape.linear(h, p("enc.tnet.w2"), p("enc.tnet.b2")));
    Var g = tape.max_pool_rows(h);
    g = tape.relu(tape.linear(g, p("enc.tnet.w3"), p("enc.tnet.b3")));
    Var a9 = tape.linear(g, p("enc.tnet.w4"), p("enc.tnet.b4"));
    Var a = tape.reshape(a9, {3, 3});
    return tape.add(a, tape.constant(Tensor::identity(3)));
}

EncodedObject encode_impl(Tape& tape, const Tensor& points, const ParamFn& p, const EncoderConfig& cfg) {
    Var pts = tape.constant(points);
    Var a = tnet_impl(tape, pts, p, cfg);
    Var aligned = tape.matmul(pts, tape.transpose(a));
    Var h = tape.relu(tape.linear(aligned, p("enc.mlp.w1"), p("enc.mlp.b1")));
    h = tape.relu(tape.linear(h, p("enc.mlp.w2"), p("enc.mlp.b2")));
    Var g = tape.max_pool_rows(h);
    Var e = tape.linear(g, p("enc.mlp.w3"), p("enc.mlp.b3"));
    return {tape.normalize(e), a};
}

} // namespace

void init_encoder_params(ParameterStore& store, const EncoderConfig& cfg, Rng& rng) {
    auto lin = [&](const std::string& w, const std::string& b, int in, int out, bool zero) {
        if (zero) {
            store.add(w, Tensor({in, out}, 0.0));
            store.add(b, Tensor({out}, 0.0));
        } else {
            store.add(w, glorot_uniform({in, out}, in, out, rng));
            store.add(b, Tensor({out}, 0.0));
        }
    };
    lin("enc.tnet.w1", "enc.tnet.b1", 3, cfg.tnet_h1, false);
    lin("enc.tnet.w2", "enc.tnet.b2", cfg.tnet_h1, cfg.tnet_h2, false);
    lin("enc.tnet.w3", "enc.tnet.b3", cfg.tnet_h2, cfg.tnet_h3, false);
    lin("enc.tnet.w4", "enc.tnet.b4", cfg.tnet_h3, 9, true); // identity at step 0
    lin("enc.mlp.w1", "enc.mlp.b1", 3, cfg.enc_h1, false);
    lin("enc.mlp.w2", "enc.mlp.b2", cfg.enc_h1, cfg.enc_h2, false);
    lin("enc.mlp.w3", "enc.mlp.b3", cfg.enc_h2, cfg.d, false);
}

Var tnet_forward(Tape& tape, Var points, TapeBinding& bind, const EncoderConfig& cfg) {
    return tnet_impl(tape, points, [&](const std::string& n) { return bind.param(n); }, cfg);
}

Var reg_loss(Tape& tape, Var a) {
    const Tensor& av = tape.val(a);
    if (av.rank() != 2 || av.rows() != av.cols()) throw std::invalid_argument("reg_loss: square matrix expected");
    Var aat = tape.matmul(a, tape.transpose(a));
    Var diff = tape.sub(tape.constant(Tensor::identity(av.rows())), aat);
    return tape.sumsq(diff);
}

EncodedObject encode_object(Tape& tape, const Tensor& points, TapeBinding& bind, const EncoderConfig& cfg) {
    return encode_impl(tape, points, [&](const std::string& n) { return bind.param(n); }, cfg);
}

EncodedObject encode_object(Tape& tape, const Tensor& points, const ParamFn& p, const EncoderConfig& cfg) {
    return encode_impl(tape, points, p, cfg);
}

Tensor encode_object_data(const Tensor& points, const ParameterStore& store, const EncoderConfig& cfg) {
    // same code path as the tape version with constant leaves, so the frozen
    // encoder produces bit-identical embeddings
    Tape scratch;
    auto enc = encode_impl(scratch, points, [&](const std::string& n) { return scratch.constant(store.value(n)); }, cfg);
    return scratch.val(enc.embedding);
}

// ---------------------------------------------------------------------------
// synthetic modal features
// ---------------------------------------------------------------------------

namespace {
void normalize_row(Tensor& t, int row) {
    const int d = t.cols();
    double nrm = 0.0;
    for (int j = 0; j < d; ++j) nrm += t.at(row, j) * t.at(row, j);
    nrm = std::sqrt(nrm);
    if (nrm <= 0.0) throw std::logic_error("modal provider produced a zero vector");
    for (int j = 0; j < d; ++j) t.at(row, j) /= nrm;
}
} // namespace

SyntheticModalProvider::SyntheticModalProvider(int n_obj, int d, std::uint64_t seed, double noise)
    : n_obj_(n_obj), d_(d), noise_(noise), seed_(seed), text_({n_obj, d}) {
    if (d < 8) throw std::invalid_argument("modal provider: d must be >= 8");
    if (n_obj < 1) throw std::invalid_argument("modal provider: n_obj must be >= 1");
    Rng rng = Rng(seed).fork(0);
    for (int c = 0; c < n_obj; ++c) {
        for (int j = 0; j < d; ++j) text_.at(c, j) = rng.normal();
        normalize_row(text_, c);
    }
    for (int a = 0; a < n_obj; ++a)
        for (int b = a + 1; b < n_obj; ++b) {
            double cos = 0.0;
            for (int j = 0; j < d; ++j) cos += text_.at(a, j) * text_.at(b, j);
            if (cos >= 0.99)
                throw std::logic_error("modal provider: prototypes of classes " + std::to_string(a) + "," +
                                       std::to_string(b) + " nearly collinear");
        }
}

Tensor SyntheticModalProvider::text_for(int label) const {
    if (label < 0 || label >= n_obj_) throw std::out_of_range("text_for: bad label");
    Tensor t({d_});
    for (int j = 0; j < d_; ++j) t.at(j) = text_.at(label, j);
    return t;
}

Tensor SyntheticModalProvider::images_for(int label, std::uint64_t instance_uid) const {
    if (label < 0 || label >= n_obj_) throw std::out_of_range("images_for: bad label");
    Rng rng = Rng(seed_).fork(1 + instance_uid);
    const int m = rng.uniform_int(1, 4);
    Tensor imgs({m, d_});
    for (int i = 0; i < m; ++i) {
        for (int j = 0; j < d_; ++j) imgs.at(i, j) = text_.at(label, j) + noise_ * rng.normal();
        normalize_row(imgs, i);
    }
    return imgs;
}

// ---------------------------------------------------------------------------
// contrastive losses
// ---------------------------------------------------------------------------

namespace {

struct SimLayout {
    Var img_sims;                                // [B, M]
    Var text_sims;                               // [B, C]
    std::vector<std::pair<int, int>> img_cols;   // per anchor [begin, end)
    int m_total = 0;
    int n_classes = 0;
};

SimLayout build_sims(Tape& tape, const ContrastiveBatch& batch, bool need_images) {
    const int b = static_cast<int>(batch.anchors.size());
    if (b < 2) throw std::invalid_argument("contrastive batch needs B >= 2");
    if (static_cast<int>(batch.labels.size()) != b) throw std::invalid_argument("batch labels size mismatch");
    SimLayout lay;
    Var z = tape.stack_rows(batch.anchors);
    if (need_images) {
        if (static_cast<int>(batch.images.size()) != b) throw std::invalid_argument("batch images size mismatch");
        int m = 0;
        for (const auto& im : batch.images) {
            lay.img_cols.emplace_back(m, m + im.rows());
            m += im.rows();
        }
        lay.m_total = m;
        Tensor all({m, tape.val(batch.anchors[0]).dim(0)});
        int r = 0;
        for (const auto& im : batch.images) {
            for (int i = 0; i < im.rows(); ++i, ++r)
                for (int j = 0; j < im.cols(); ++j) all.at(r, j) = im.at(i, j);
        }
        lay.img_sims = tape.matmul(z, tape.transpose(tape.constant(std::move(all))));
    }
    lay.n_classes = batch.text.rows();
    lay.text_sims = tape.matmul(z, tape.transpose(tape.constant(batch.text)));
    return lay;
}

Var mean_of(Tape& tape, const std::vector<Var>& xs) {
    return tape.mean(tape.stack_scalars(xs));
}

} // namespace

Var visual_contrastive_loss(Tape& tape, const ContrastiveBatch& batch) {
    const int b = static_cast<int>(batch.anchors.size());
    SimLayout lay = build_sims(tape, batch, true);
    const double inv_tau = 1.0 / batch.tau;
    std::vector<Var> contributions;
    for (int i = 0; i < b; ++i) {
        std::vector<int> pos_anchor_idx;
        std::vector<Var> neg_terms;
        for (int r = 0; r < b; ++r) {
            if (batch.labels[static_cast<std::size_t>(r)] == batch.labels[static_cast<std::size_t>(i)]) {
                pos_anchor_idx.push_back(r);
            } else {
                for (int c = lay.img_cols[static_cast<std::size_t>(r)].first; c < lay.img_cols[static_cast<std::size_t>(r)].second; ++c)
                    neg_terms.push_back(tape.scale(tape.pick(lay.img_sims, i * lay.m_total + c), inv_tau));
            }
        }
        if (neg_terms.empty()) {
            std::cerr << "[ssg] visual loss: anchor " << i << " has no negative images, skipped\n";
            continue;
        }
        Var lse = tape.logsumexp(tape.stack_scalars(neg_terms));
        std::vector<Var> pos_terms;
        for (int p : pos_anchor_idx)
            for (int c = lay.img_cols[static_cast<std::size_t>(p)].first; c < lay.img_cols[static_cast<std::size_t>(p)].second; ++c)
                pos_terms.push_back(tape.pick(lay.img_sims, i * lay.m_total + c));
        const double inv_p = 1.0 / static_cast<double>(pos_anchor_idx.size());
        // (1/|P|) * sum_{p,z+} (-s+/tau + lse)
        Var pos_sum = tape.sum(tape.stack_scalars(pos_terms));
        Var li = tape.add(tape.scale(pos_sum, -inv_tau * inv_p),
                          tape.scale(lse, static_cast<double>(pos_terms.size()) * inv_p));
        contributions.push_back(li);
    }
    if (contributions.empty()) throw std::invalid_argument("visual loss: no anchor has a valid negative");
    return mean_of(tape, contributions);
}

Var text_contrastive_loss(Tape& tape, const ContrastiveBatch& batch) {
    const int b = static_cast<int>(batch.anchors.size());
    SimLayout lay = build_sims(tape, batch, false);
    const double inv_tau = 1.0 / batch.tau;
    std::vector<Var> contributions;
    for (int i = 0; i < b; ++i) {
        std::vector<Var> neg_terms;
        for (int r = 0; r < b; ++r) {
            if (batch.labels[static_cast<std::size_t>(r)] == batch.labels[static_cast<std::size_t>(i)]) continue;
            neg_terms.push_back(tape.scale(
                tape.pick(lay.text_sims, i * lay.n_classes + batch.labels[static_cast<std::size_t>(r)]), inv_tau));
        }
        if (neg_terms.empty()) {
            std::cerr << "[ssg] text loss: anchor " << i << " has no negatives, skipped\n";
            continue;
        }
        Var pos = tape.pick(lay.text_sims, i * lay.n_classes + batch.labels[static_cast<std::size_t>(i)]);
        Var lse = tape.logsumexp(tape.stack_scalars(neg_terms));
        contributions.push_back(tape.add(tape.scale(pos, -inv_tau), lse));
    }
    if (contributions.empty()) throw std::invalid_argument("text loss: no anchor has a valid negative");
    return mean_of(tape, contributions);
}

Var cross_modal_loss(Tape& tape, const ContrastiveBatch& batch) {
    // equals (1/B) sum_i (L_i_visual + L_i_text) when every anchor contributes
    return tape.add(visual_contrastive_loss(tape, batch), text_contrastive_loss(tape, batch));
}

Var pretrain_loss(Tape& tape, const ContrastiveBatch& batch, const std::vector<Var>& tnet_matrices,
                  double lambda_reg, double lambda_cross) {
    Var cross = cross_modal_loss(tape, batch);
    if (tnet_matrices.empty()) return tape.scale(cross, lambda_cross);
    Var reg_sum = reg_loss(tape, tnet_matrices[0]);
    for (std::size_t i = 1; i < tnet_matrices.size(); ++i) reg_sum = tape.add(reg_sum, reg_loss(tape, tnet_matrices[i]));
    return tape.add(tape.scale(reg_sum, lambda_reg), tape.scale(cross, lambda_cross));
}

Var coupled_text_loss_anchor(Tape& tape, const ContrastiveBatch& batch, int i) {
    const int b = static_cast<int>(batch.anchors.size());
    if (i < 0 || i >= b) throw std::out_of_range("coupled loss: bad anchor index");
    SimLayout lay = build_sims(tape, batch, false);
    const double inv_tau = 1.0 / batch.tau;
    std::vector<Var> all_terms;
    for (int a = 0; a < b; ++a)
        all_terms.push_back(tape.scale(
            tape.pick(lay.text_sims, i * lay.n_classes + batch.labels[static_cast<std::size_t>(a)]), inv_tau));
    Var pos = tape.pick(lay.text_sims, i * lay.n_classes + batch.labels[static_cast<std::size_t>(i)]);
    return tape.add(tape.scale(pos, -inv_tau), tape.logsumexp(tape.stack_scalars(all_terms)));
}

Var coupled_text_loss(Tape& tape, const ContrastiveBatch& batch) {
    std::vector<Var> per_anchor;
    for (int i = 0; i < static_cast<int>(batch.anchors.size()); ++i)
        per_anchor.push_back(coupled_text_loss_anchor(tape, batch, i));
    return mean_of(tape, per_anchor);
}

namespace {
double sim_to_text(const Tape& tape, const ContrastiveBatch& batch, int i, int label) {
    const Tensor& z = tape.val(batch.anchors[static_cast<std::size_t>(i)]);
    double s = 0.0;
    for (int j = 0; j < z.dim(0); ++j) s += z.at(j) * batch.text.at(label, j);
    return s;
}
} // namespace

double npc_multiplier(const ContrastiveBatch& batch, const Tape& tape, int i) {
    const int b = static_cast<int>(batch.anchors.size());
    if (i < 0 || i >= b) throw std::out_of_range("npc_multiplier: bad anchor index");
    int n_pos = 0;
    double n_tilde = 0.0;
    for (int r = 0; r < b; ++r) {
        if (batch.labels[static_cast<std::size_t>(r)] == batch.labels[static_cast<std::size_t>(i)]) {
            ++n_pos;
        } else {
            n_tilde += std::exp(sim_to_text(tape, batch, i, batch.labels[static_cast<std::size_t>(r)]) / batch.tau);
        }
    }
    const double p_tilde =
        n_pos * std::exp(sim_to_text(tape, batch, i, batch.labels[static_cast<std::size_t>(i)]) / batch.tau);
    return n_tilde / (p_tilde + n_tilde);
}

Tensor npc_closed_form_neg_grad(const ContrastiveBatch& batch, const Tape& tape, int i) {
    const int b = static_cast<int>(batch.anchors.size());
    const int d = batch.text.cols();
    const double q = npc_multiplier(batch, tape, i);
    double n_tilde = 0.0;
    Tensor weighted({d}, 0.0);
    for (int r = 0; r < b; ++r) {
        if (batch.labels[static_cast<std::size_t>(r)] == batch.labels[static_cast<std::size_t>(i)]) continue;
        const int lab = batch.labels[static_cast<std::size_t>(r)];
        const double w = std::exp(sim_to_text(tape, batch, i, lab) / batch.tau);
        n_tilde += w;
        for (int j = 0; j < d; ++j) weighted.at(j) += w * batch.text.at(lab, j);
    }
    Tensor out({d});
    const int ci = batch.labels[static_cast<std::size_t>(i)];
    for (int j = 0; j < d; ++j) out.at(j) = (q / batch.tau) * (batch.text.at(ci, j) - weighted.at(j) / n_tilde);
    return out;
}

Var ce_like_loss_anchor(Tape& tape, const ContrastiveBatch& batch, int i) {
    SimLayout lay = build_sims(tape, batch, false);
    const double inv_tau = 1.0 / batch.tau;
    std::vector<Var> class_terms;
    for (int c = 0; c < lay.n_classes; ++c)
        class_terms.push_back(tape.scale(tape.pick(lay.text_sims, i * lay.n_classes + c), inv_tau));
    Var pos = tape.pick(lay.text_sims, i * lay.n_classes + batch.labels[static_cast<std::size_t>(i)]);
    return tape.add(tape.scale(pos, -inv_tau), tape.logsumexp(tape.stack_scalars(class_terms)));
}

Var ce_like_loss(Tape& tape, const ContrastiveBatch& batch) {
    std::vector<Var> per_anchor;
    for (int i = 0; i < static_cast<int>(batch.anchors.size()); ++i)
        per_anchor.push_back(ce_like_loss_anchor(tape, batch, i));
    return mean_of(tape, per_anchor);
}

double ce_like_multiplier(const ContrastiveBatch& batch, const Tape& tape, int i) {
    const int c_count = batch.text.rows();
    const int ci = batch.labels[static_cast<std::size_t>(i)];
    // stable: subtract max logit
    std::vector<double> logits(static_cast<std::size_t>(c_count));
    double mx = -1e300;
    for (int c = 0; c < c_count; ++c) {
        logits[static_cast<std::size_t>(c)] = sim_to_text(tape, batch, i, c) / batch.tau;
        mx = std::max(mx, logits[static_cast<std::size_t>(c)]);
    }
    double denom = 0.0, neg = 0.0;
    for (int c = 0; c < c_count; ++c) {
        const double e = std::exp(logits[static_cast<std::size_t>(c)] - mx);
        denom += e;
        if (c != ci) neg += e;
    }
    return neg / denom;
}

} // namespace ssg
