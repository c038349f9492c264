#include "ssg/trainer.hpp"

#include "ssg/metrics.hpp"
#include "ssg/util.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <iostream>
#include <sstream>
#include <stdexcept>

namespace ssg {

using nlohmann::json;

ModelConfig TrainConfig::model(int inferred_n_obj, int inferred_n_pred) const {
    ModelConfig mc;
    mc.n_obj = n_obj > 0 ? n_obj : inferred_n_obj;
    mc.n_pred = n_pred > 0 ? n_pred : inferred_n_pred;
    if (mc.n_obj < inferred_n_obj || mc.n_pred < inferred_n_pred)
        throw std::invalid_argument("config: n_obj/n_pred smaller than the labels present in the data");
    mc.d = d;
    mc.d_e = d_e;
    mc.heads = heads;
    mc.iterations = iterations;
    mc.points = points;
    mc.gse = gse;
    mc.beg = beg;
    mc.gating = gating;
    mc.lse = lse;
    mc.ofl = ofl;
    return mc;
}

TrainConfig TrainConfig::desk() {
    TrainConfig cfg;
    cfg.pretrain_epochs = 50;
    cfg.pretrain_batch = 16;
    cfg.pretrain_lr = 0.005;
    cfg.lr = 2e-3;
    cfg.epochs = 60;
    cfg.points = 64;
    cfg.d = 64;
    cfg.d_e = 128;
    cfg.heads = 4;
    cfg.iterations = 1;
    return cfg;
}

namespace {

void apply_kv(TrainConfig& cfg, const std::string& key, const json& v) {
    if (key == "lambda_obj") cfg.lambda_obj = v.get<double>();
    else if (key == "lambda_rel") cfg.lambda_rel = v.get<double>();
    else if (key == "lambda_lse") cfg.lambda_lse = v.get<double>();
    else if (key == "lambda_cross") cfg.lambda_cross = v.get<double>();
    else if (key == "lambda_reg") cfg.lambda_reg = v.get<double>();
    else if (key == "tau") cfg.tau = v.get<double>();
    else if (key == "pretrain_lr") cfg.pretrain_lr = v.get<double>();
    else if (key == "pretrain_epochs") cfg.pretrain_epochs = v.get<int>();
    else if (key == "pretrain_batch") cfg.pretrain_batch = v.get<int>();
    else if (key == "lr") cfg.lr = v.get<double>();
    else if (key == "epochs") cfg.epochs = v.get<int>();
    else if (key == "batch_scenes") cfg.batch_scenes = v.get<int>();
    else if (key == "weight_decay") cfg.weight_decay = v.get<double>();
    else if (key == "d") cfg.d = v.get<int>();
    else if (key == "d_e") cfg.d_e = v.get<int>();
    else if (key == "heads") cfg.heads = v.get<int>();
    else if (key == "iterations") cfg.iterations = v.get<int>();
    else if (key == "points") cfg.points = v.get<int>();
    else if (key == "n_obj") cfg.n_obj = v.get<int>();
    else if (key == "n_pred") cfg.n_pred = v.get<int>();
    else if (key == "modal_noise") cfg.modal_noise = v.get<double>();
    else if (key == "gse") cfg.gse = v.get<bool>();
    else if (key == "beg") cfg.beg = v.get<bool>();
    else if (key == "lse") cfg.lse = v.get<bool>();
    else if (key == "ofl") cfg.ofl = v.get<bool>();
    else if (key == "gating") cfg.gating = v.get<bool>();
    else if (key == "seed") cfg.seed = v.get<std::uint64_t>();
    else throw std::invalid_argument("config: unknown key '" + key + "'");
}

json parse_scalar(const std::string& raw) {
    if (raw == "true") return json(true);
    if (raw == "false") return json(false);
    try {
        std::size_t pos = 0;
        if (raw.find('.') != std::string::npos || raw.find('e') != std::string::npos ||
            raw.find('E') != std::string::npos) {
            const double d = std::stod(raw, &pos);
            if (pos == raw.size()) return json(d);
        } else {
            const long long i = std::stoll(raw, &pos);
            if (pos == raw.size()) return json(i);
        }
    } catch (...) {
    }
    throw std::invalid_argument("config: cannot parse value '" + raw + "'");
}

std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

} // namespace

TrainConfig TrainConfig::from_text(const std::string& text) {
    TrainConfig cfg;
    const std::string body = trim(text);
    if (!body.empty() && body.front() == '{') {
        const json j = json::parse(body);
        for (auto it = j.begin(); it != j.end(); ++it) apply_kv(cfg, it.key(), it.value());
        return cfg;
    }
    std::istringstream in(body);
    std::string line;
    while (std::getline(in, line)) {
        const std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        const auto eq = t.find('=');
        if (eq == std::string::npos) throw std::invalid_argument("config: expected key=value, got '" + t + "'");
        apply_kv(cfg, trim(t.substr(0, eq)), parse_scalar(trim(t.substr(eq + 1))));
    }
    return cfg;
}

TrainConfig TrainConfig::from_file(const std::string& path) { return from_text(read_file(path)); }

std::string TrainConfig::to_json() const {
    json j;
    j["lambda_obj"] = lambda_obj;
    j["lambda_rel"] = lambda_rel;
    j["lambda_lse"] = lambda_lse;
    j["lambda_cross"] = lambda_cross;
    j["lambda_reg"] = lambda_reg;
    j["tau"] = tau;
    j["pretrain_lr"] = pretrain_lr;
    j["pretrain_epochs"] = pretrain_epochs;
    j["pretrain_batch"] = pretrain_batch;
    j["lr"] = lr;
    j["epochs"] = epochs;
    j["batch_scenes"] = batch_scenes;
    j["weight_decay"] = weight_decay;
    j["d"] = d;
    j["d_e"] = d_e;
    j["heads"] = heads;
    j["iterations"] = iterations;
    j["points"] = points;
    j["n_obj"] = n_obj;
    j["n_pred"] = n_pred;
    j["modal_noise"] = modal_noise;
    j["gse"] = gse;
    j["beg"] = beg;
    j["lse"] = lse;
    j["ofl"] = ofl;
    j["gating"] = gating;
    j["seed"] = seed;
    return j.dump(2) + "\n";
}

int infer_n_obj(const Dataset& data) {
    int mx = -1;
    for (const auto* split : {&data.train, &data.val})
        for (const auto& s : *split)
            for (const auto& inst : s.instances) mx = std::max(mx, inst.label);
    if (mx < 0) throw std::invalid_argument("dataset has no instances");
    return mx + 1;
}

int infer_n_pred(const Dataset& data) {
    int mx = -1;
    for (const auto* split : {&data.train, &data.val})
        for (const auto& s : *split)
            for (const auto& e : s.edges)
                for (int p : e.preds) mx = std::max(mx, p);
    return mx + 1; // 0 when there are no predicates at all
}

// ---------------------------------------------------------------------------
// pretraining
// ---------------------------------------------------------------------------

namespace {

struct PretrainInstance {
    Tensor points; // raw, translated lazily
    int label = 0;
    std::uint64_t uid = 0;
};

std::vector<PretrainInstance> collect_instances(const std::vector<Scene>& scenes) {
    std::vector<PretrainInstance> out;
    std::uint64_t uid = 0;
    for (const auto& s : scenes)
        for (const auto& inst : s.instances) out.push_back({inst.points, inst.label, uid++});
    return out;
}

int classify_by_text(const Tensor& embedding, const Tensor& text) {
    int best = 0;
    double best_s = -1e300;
    for (int c = 0; c < text.rows(); ++c) {
        double s = 0.0;
        for (int j = 0; j < text.cols(); ++j) s += embedding.at(j) * text.at(c, j);
        if (s > best_s) {
            best_s = s;
            best = c;
        }
    }
    return best;
}

double topk_accuracy(const std::vector<Tensor>& embeds, const std::vector<int>& labels, const Tensor& text, int k) {
    if (embeds.empty()) return 0.0;
    int hit = 0;
    for (std::size_t i = 0; i < embeds.size(); ++i) {
        std::vector<std::pair<double, int>> scored;
        for (int c = 0; c < text.rows(); ++c) {
            double s = 0.0;
            for (int j = 0; j < text.cols(); ++j) s += embeds[i].at(j) * text.at(c, j);
            scored.emplace_back(-s, c);
        }
        std::stable_sort(scored.begin(), scored.end());
        const int kk = std::min(k, text.rows());
        for (int r = 0; r < kk; ++r)
            if (scored[static_cast<std::size_t>(r)].second == labels[i]) {
                ++hit;
                break;
            }
    }
    return 100.0 * hit / static_cast<double>(embeds.size());
}

} // namespace

PretrainResult run_pretraining(const Dataset& data, const TrainConfig& cfg) {
    if (data.train.empty() || data.val.empty())
        throw std::invalid_argument("pretraining requires non-empty train and val splits");
    const int n_obj = cfg.n_obj > 0 ? cfg.n_obj : infer_n_obj(data);

    Rng root(cfg.seed);
    ModelConfig mc = cfg.model(n_obj, std::max(1, cfg.n_pred));
    const EncoderConfig ec = mc.encoder();

    ParameterStore store;
    {
        Rng init_rng = root.fork(0xE2C);
        init_encoder_params(store, ec, init_rng);
    }
    SyntheticModalProvider provider(n_obj, cfg.d, splitmix64(cfg.seed ^ 0xA11), cfg.modal_noise);

    auto train_inst = collect_instances(data.train);
    auto val_inst = collect_instances(data.val);
    if (static_cast<int>(train_inst.size()) < 2) throw std::invalid_argument("pretraining needs >= 2 train instances");

    // deterministic val preprocessing, fixed across epochs (no augmentation)
    std::vector<Tensor> val_points;
    std::vector<int> val_labels;
    for (std::size_t i = 0; i < val_inst.size(); ++i) {
        Rng r = root.fork(0x7A1000 + i);
        val_points.push_back(downsample(translate_to_origin(val_inst[i].points), cfg.points, r));
        val_labels.push_back(val_inst[i].label);
    }

    PretrainResult res;
    res.n_obj = n_obj;
    res.encoder = store;
    double best = -1.0;

    AdamConfig adam;
    adam.weight_decay = 0.0; // plain Adam for pretraining

    for (int epoch = 0; epoch < cfg.pretrain_epochs; ++epoch) {
        adam.lr = cosine_lr(cfg.pretrain_lr, epoch, cfg.pretrain_epochs);
        Rng erng = root.fork(0xE0000 + static_cast<std::uint64_t>(epoch));
        std::vector<int> order(train_inst.size());
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
        erng.shuffle(order);

        double epoch_loss = 0.0;
        int batches = 0;
        const int bsz = std::max(2, cfg.pretrain_batch);
        for (std::size_t start = 0; start + 2 <= order.size(); start += static_cast<std::size_t>(bsz)) {
            const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(bsz));
            if (end - start < 2) break;
            bool heterogeneous = false;
            for (std::size_t i = start + 1; i < end && !heterogeneous; ++i)
                heterogeneous = train_inst[static_cast<std::size_t>(order[i])].label !=
                                train_inst[static_cast<std::size_t>(order[start])].label;
            if (!heterogeneous) {
                std::cerr << "[ssg] pretrain: skipping label-homogeneous batch\n";
                continue;
            }

            Tape tape;
            TapeBinding bind(tape, store);
            auto getp = bind_params(bind);
            ContrastiveBatch batch;
            batch.tau = cfg.tau;
            batch.text = provider.text();
            std::vector<Var> tnets;
            for (std::size_t i = start; i < end; ++i) {
                const auto& inst = train_inst[static_cast<std::size_t>(order[i])];
                Tensor pts = translate_to_origin(inst.points);
                pts = random_z_rotation(pts, erng);
                pts = downsample(pts, cfg.points, erng);
                auto enc = encode_object(tape, pts, getp, ec);
                batch.anchors.push_back(enc.embedding);
                batch.labels.push_back(inst.label);
                batch.images.push_back(provider.images_for(inst.label, inst.uid));
                tnets.push_back(enc.tnet_matrix);
            }
            Var loss = pretrain_loss(tape, batch, tnets, cfg.lambda_reg, cfg.lambda_cross);
            tape.backward(loss);
            store.zero_grad();
            bind.pull_grads();
            adam_step(store, adam);
            epoch_loss += tape.val(loss).item();
            batches += 1;
        }

        std::vector<Tensor> val_emb;
        for (const auto& vp : val_points) val_emb.push_back(encode_object_data(vp, store, ec));
        PretrainEpochRow row;
        row.epoch = epoch;
        row.loss = batches ? epoch_loss / batches : 0.0;
        row.top1 = topk_accuracy(val_emb, val_labels, provider.text(), 1);
        row.top5 = topk_accuracy(val_emb, val_labels, provider.text(), 5);
        row.top10 = topk_accuracy(val_emb, val_labels, provider.text(), 10);
        row.cumulative = row.top1 + row.top5 + row.top10;
        res.history.push_back(row);
        if (row.cumulative > best) {
            best = row.cumulative;
            res.encoder = store;
            res.best_epoch = epoch;
        }
    }
    return res;
}

// ---------------------------------------------------------------------------
// scene-graph training
// ---------------------------------------------------------------------------

PredictionDump predict_dump(const std::vector<Scene>& scenes, const ParameterStore& store, const ModelConfig& cfg,
                            std::uint64_t seed) {
    PredictionDump dump;
    dump.reserve(scenes.size());
    for (std::size_t i = 0; i < scenes.size(); ++i)
        dump.push_back(predict_scene(scenes[i], store, cfg, splitmix64(seed ^ (0x5EED + i))));
    return dump;
}

SgResult run_sg_training(const Dataset& data, const ParameterStore* encoder, const TrainConfig& cfg) {
    if (data.train.empty()) throw std::invalid_argument("scene-graph training requires a train split");
    const int n_obj = infer_n_obj(data);
    const int n_pred = std::max(1, infer_n_pred(data));
    const ModelConfig mc = cfg.model(n_obj, n_pred);
    const EncoderConfig ec = mc.encoder();

    Rng root(cfg.seed);
    ParameterStore store;
    if (cfg.ofl) {
        if (!encoder) throw std::invalid_argument("ofl=true requires a pretrained encoder checkpoint");
        for (const auto& [name, e] : encoder->entries())
            if (name.rfind("enc.", 0) == 0) store.add(name, e.value, /*trainable=*/false);
        if (store.size() == 0) throw std::invalid_argument("encoder checkpoint has no enc.* tensors");
    } else {
        Rng enc_rng = root.fork(0xE2C);
        init_encoder_params(store, ec, enc_rng);
    }
    {
        Rng graph_rng = root.fork(0x9A4);
        init_graph_params(store, mc, graph_rng);
    }

    std::vector<SceneTensors> train_st;
    for (const auto& s : data.train) train_st.push_back(prepare_scene(s, mc));

    // frozen path: embeddings are fixed, compute once
    std::vector<std::vector<Tensor>> cached_emb(data.train.size());
    if (cfg.ofl) {
        for (std::size_t i = 0; i < data.train.size(); ++i) {
            const auto proc = preprocess_scene_points(data.train[i], mc.points, root.fork(0xCAFE00 + i));
            for (const auto& pts : proc) cached_emb[i].push_back(encode_object_data(pts, store, ec));
        }
    }

    SgResult res;
    res.model_cfg = mc;
    res.model = store;
    double best = -1.0;

    AdamConfig adam;
    adam.weight_decay = cfg.weight_decay;

    LossWeights weights{cfg.lambda_obj, cfg.lambda_rel, cfg.lambda_lse};

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        adam.lr = cosine_lr(cfg.lr, epoch, cfg.epochs);
        Rng erng = root.fork(0x700000 + static_cast<std::uint64_t>(epoch));
        std::vector<int> order(data.train.size());
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
        erng.shuffle(order);

        double epoch_loss = 0.0;
        int counted = 0;
        const int bsz = std::max(1, cfg.batch_scenes);
        for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(bsz)) {
            const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(bsz));
            store.zero_grad();
            const double inv_batch = 1.0 / static_cast<double>(end - start);
            for (std::size_t i = start; i < end; ++i) {
                const int sidx = order[i];
                Tape tape;
                TapeBinding bind(tape, store);
                auto getp = bind_params(bind);
                EmbeddingSource src;
                std::vector<Tensor> proc;
                if (cfg.ofl) {
                    src.cached = &cached_emb[static_cast<std::size_t>(sidx)];
                } else {
                    proc = preprocess_scene_points(data.train[static_cast<std::size_t>(sidx)], mc.points,
                                                   root.fork(0xD0000 + static_cast<std::uint64_t>(epoch) * 8192 +
                                                             static_cast<std::uint64_t>(sidx)));
                    src.points = &proc;
                }
                SceneForward fwd = scene_forward(tape, train_st[static_cast<std::size_t>(sidx)], src, getp, mc);
                Var loss = sg_loss(tape, fwd, train_st[static_cast<std::size_t>(sidx)], mc, weights);
                if (!cfg.ofl && !fwd.tnet_mats.empty()) {
                    // affine regularizer also applies when the encoder trains jointly
                    Var reg = reg_loss(tape, fwd.tnet_mats[0]);
                    for (std::size_t m = 1; m < fwd.tnet_mats.size(); ++m)
                        reg = tape.add(reg, reg_loss(tape, fwd.tnet_mats[m]));
                    loss = tape.add(loss, tape.scale(reg, cfg.lambda_reg));
                }
                epoch_loss += tape.val(loss).item();
                counted += 1;
                Var scaled = tape.scale(loss, inv_batch);
                tape.backward(scaled);
                bind.pull_grads();
            }
            adam_step(store, adam);
        }

        SgEpochRow row;
        row.epoch = epoch;
        row.loss = counted ? epoch_loss / counted : 0.0;
        if (!data.val.empty()) {
            const PredictionDump vdump = predict_dump(data.val, store, mc, splitmix64(cfg.seed ^ 0xA77));
            row.val_mr50 = triplet_mean_recall_at_k(vdump, 50, {});
        }
        res.history.push_back(row);
        if (data.val.empty()) {
            res.model = store;
            res.best_epoch = epoch;
        } else if (row.val_mr50 > best) {
            best = row.val_mr50;
            res.model = store;
            res.best_epoch = epoch;
        }
    }
    if (cfg.epochs == 0) res.model = store;
    return res;
}

std::string pretrain_history_csv(const std::vector<PretrainEpochRow>& rows) {
    std::ostringstream os;
    os << "epoch,loss,top1,top5,top10,cumulative\n";
    for (const auto& r : rows)
        os << r.epoch << ',' << fmt_full(r.loss) << ',' << fmt_full(r.top1) << ',' << fmt_full(r.top5) << ','
           << fmt_full(r.top10) << ',' << fmt_full(r.cumulative) << '\n';
    return os.str();
}

std::string sg_history_csv(const std::vector<SgEpochRow>& rows) {
    std::ostringstream os;
    os << "epoch,loss,val_triplet_mr50\n";
    for (const auto& r : rows) os << r.epoch << ',' << fmt_full(r.loss) << ',' << fmt_full(r.val_mr50) << '\n';
    return os.str();
}

} // namespace ssg
