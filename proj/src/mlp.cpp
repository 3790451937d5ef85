#include "diagno/mlp.hpp"

#include "diagno/errors.hpp"
#include "diagno/io.hpp"
#include "diagno/manifest.hpp"
#include "diagno/numeric_format.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>

namespace diagno {

using nlohmann::json;

Eigen::Index Standardizer::kept_dim() const {
    return static_cast<Eigen::Index>(std::count(keep.begin(), keep.end(), 1));
}

Vector Standardizer::apply(const Vector& raw) const {
    if (raw.size() != mean.size()) {
        throw ValidationError("input has " + std::to_string(raw.size()) + " features, model expects " +
                              std::to_string(mean.size()));
    }
    Vector out(kept_dim());
    Eigen::Index k = 0;
    for (Eigen::Index j = 0; j < raw.size(); ++j) {
        if (keep[static_cast<std::size_t>(j)]) {
            out[k++] = (raw[j] - mean[j]) / sd[j];
        }
    }
    return out;
}

Matrix Standardizer::apply_rows(const Matrix& raw) const {
    Matrix out(raw.rows(), kept_dim());
    for (Eigen::Index i = 0; i < raw.rows(); ++i) {
        out.row(i) = apply(raw.row(i).transpose()).transpose();
    }
    return out;
}

Standardizer fit_standardizer(const Matrix& rows) {
    if (rows.rows() < 1) {
        throw ValidationError("cannot standardize an empty matrix");
    }
    Standardizer s;
    const double n = static_cast<double>(rows.rows());
    s.mean = rows.colwise().mean().transpose();
    s.sd.resize(rows.cols());
    s.keep.assign(static_cast<std::size_t>(rows.cols()), 0);
    for (Eigen::Index j = 0; j < rows.cols(); ++j) {
        const double ss = (rows.col(j).array() - s.mean[j]).square().sum();
        const double sd = rows.rows() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
        const bool keep = sd > 1e-12 * std::max(1.0, std::abs(s.mean[j]));
        s.sd[j] = keep ? sd : 1.0;
        s.keep[static_cast<std::size_t>(j)] = keep ? 1 : 0;
    }
    return s;
}

Standardizer identity_standardizer(Eigen::Index d) {
    Standardizer s;
    s.mean = Vector::Zero(d);
    s.sd = Vector::Ones(d);
    s.keep.assign(static_cast<std::size_t>(d), 1);
    return s;
}

void MlpModel::validate() const {
    const Eigen::Index k = standardizer.kept_dim();
    if (static_cast<Eigen::Index>(feature_names.size()) != standardizer.input_dim() ||
        standardizer.sd.size() != standardizer.input_dim() ||
        static_cast<Eigen::Index>(standardizer.keep.size()) != standardizer.input_dim()) {
        throw ValidationError("model feature names and standardization disagree");
    }
    if (w1.rows() != kHidden1 || w1.cols() != k || b1.size() != kHidden1 || w2.rows() != kHidden2 ||
        w2.cols() != kHidden1 || b2.size() != kHidden2 || w3.rows() != 1 || w3.cols() != kHidden2) {
        throw ValidationError("model weight shapes are inconsistent");
    }
    if (!w1.allFinite() || !b1.allFinite() || !w2.allFinite() || !b2.allFinite() || !w3.allFinite() ||
        !std::isfinite(b3)) {
        throw ValidationError("model weights must be finite");
    }
    for (Eigen::Index j = 0; j < standardizer.input_dim(); ++j) {
        if (standardizer.keep[static_cast<std::size_t>(j)] && !(standardizer.sd[j] > 0.0)) {
            throw ValidationError("kept features need a positive standard deviation");
        }
    }
    if (!(dropout >= 0.0 && dropout < 1.0)) {
        throw ValidationError("dropout rate must lie in [0, 1)");
    }
}

MlpModel zero_model(std::vector<std::string> names, Standardizer standardizer, double dropout) {
    MlpModel m;
    m.feature_names = std::move(names);
    m.standardizer = std::move(standardizer);
    const Eigen::Index k = m.standardizer.kept_dim();
    m.w1 = Matrix::Zero(kHidden1, k);
    m.b1 = Vector::Zero(kHidden1);
    m.w2 = Matrix::Zero(kHidden2, kHidden1);
    m.b2 = Vector::Zero(kHidden2);
    m.w3 = Matrix::Zero(1, kHidden2);
    m.b3 = 0.0;
    m.dropout = dropout;
    m.validate();
    return m;
}

MlpModel he_init(std::vector<std::string> names, Standardizer standardizer, double dropout, Random& rng) {
    MlpModel m = zero_model(std::move(names), std::move(standardizer), dropout);
    auto fill = [&](Matrix& w) {
        const double scale = w.cols() > 0 ? std::sqrt(2.0 / static_cast<double>(w.cols())) : 0.0;
        for (Eigen::Index r = 0; r < w.rows(); ++r) {
            for (Eigen::Index c = 0; c < w.cols(); ++c) {
                w(r, c) = scale * rng.normal();
            }
        }
    };
    fill(m.w1);
    fill(m.w2);
    fill(m.w3);
    return m;
}

namespace {

struct Activations {
    Vector a1, h1, a2, h2;
    double z = 0.0;
};

/// Forward pass on standardized input; masks already carry the 1/(1 - rate) scaling.
Activations run(const MlpModel& m, const Vector& xs, const Vector* mask1, const Vector* mask2) {
    if (xs.size() != m.w1.cols()) {
        throw ValidationError("standardized input has the wrong dimension");
    }
    Activations a;
    a.a1 = m.w1 * xs + m.b1;
    a.h1 = a.a1.cwiseMax(0.0);
    if (mask1) {
        a.h1 = a.h1.cwiseProduct(*mask1);
    }
    a.a2 = m.w2 * a.h1 + m.b2;
    a.h2 = a.a2.cwiseMax(0.0);
    if (mask2) {
        a.h2 = a.h2.cwiseProduct(*mask2);
    }
    a.z = (m.w3 * a.h2)(0, 0) + m.b3;
    return a;
}

double sigmoid(double z) {
    if (z >= 0.0) {
        return 1.0 / (1.0 + std::exp(-z));
    }
    const double e = std::exp(z);
    return e / (1.0 + e);
}

double bce_from_logit(double z, int y) {
    return std::max(z, 0.0) - z * static_cast<double>(y) + std::log1p(std::exp(-std::abs(z)));
}

Vector dropout_mask(Random& rng, Eigen::Index n, double rate) {
    Vector m(n);
    const double scale = 1.0 / (1.0 - rate);
    for (Eigen::Index k = 0; k < n; ++k) {
        m[k] = rng.uniform() < rate ? 0.0 : scale;
    }
    return m;
}

/// Backward pass from dLoss/dlogit.
Gradients backward(const MlpModel& m, const Vector& xs, const Activations& a, double dz, const Vector* mask1,
                   const Vector* mask2) {
    Gradients g;
    g.w3 = dz * a.h2.transpose();
    g.b3 = dz;
    Vector dh2 = m.w3.transpose() * dz;
    if (mask2) {
        dh2 = dh2.cwiseProduct(*mask2);
    }
    const Vector da2 = (a.a2.array() > 0.0).select(dh2.array(), 0.0).matrix();
    g.w2 = da2 * a.h1.transpose();
    g.b2 = da2;
    Vector dh1 = m.w2.transpose() * da2;
    if (mask1) {
        dh1 = dh1.cwiseProduct(*mask1);
    }
    const Vector da1 = (a.a1.array() > 0.0).select(dh1.array(), 0.0).matrix();
    g.w1 = da1 * xs.transpose();
    g.b1 = da1;
    return g;
}

} // namespace

double logit_standardized(const MlpModel& model, const Vector& xs) { return run(model, xs, nullptr, nullptr).z; }

double logit(const MlpModel& model, const Vector& raw) {
    return logit_standardized(model, model.standardizer.apply(raw));
}

double forward(const MlpModel& model, const Vector& raw, bool training, std::uint64_t seed) {
    const Vector xs = model.standardizer.apply(raw);
    if (!training || model.dropout == 0.0) {
        return sigmoid(run(model, xs, nullptr, nullptr).z);
    }
    Random rng(seed);
    const Vector m1 = dropout_mask(rng, kHidden1, model.dropout);
    const Vector m2 = dropout_mask(rng, kHidden2, model.dropout);
    return sigmoid(run(model, xs, &m1, &m2).z);
}

Gradients Gradients::zeros_like(const MlpModel& m) {
    Gradients g;
    g.w1 = Matrix::Zero(m.w1.rows(), m.w1.cols());
    g.b1 = Vector::Zero(m.b1.size());
    g.w2 = Matrix::Zero(m.w2.rows(), m.w2.cols());
    g.b2 = Vector::Zero(m.b2.size());
    g.w3 = Matrix::Zero(1, m.w3.cols());
    g.b3 = 0.0;
    return g;
}

Gradients& Gradients::operator+=(const Gradients& o) {
    w1 += o.w1;
    b1 += o.b1;
    w2 += o.w2;
    b2 += o.b2;
    w3 += o.w3;
    b3 += o.b3;
    return *this;
}

Gradients& Gradients::operator*=(double s) {
    w1 *= s;
    b1 *= s;
    w2 *= s;
    b2 *= s;
    w3 *= s;
    b3 *= s;
    return *this;
}

double Gradients::squared_norm() const {
    return w1.squaredNorm() + b1.squaredNorm() + w2.squaredNorm() + b2.squaredNorm() + w3.squaredNorm() + b3 * b3;
}

Gradients backprop_gradient(const MlpModel& model, const Vector& raw, int y, double loss_scale) {
    if (y != 0 && y != 1) {
        throw ValidationError("label must be 0 or 1");
    }
    const Vector xs = model.standardizer.apply(raw);
    const auto a = run(model, xs, nullptr, nullptr);
    const double dz = loss_scale * (sigmoid(a.z) - static_cast<double>(y));
    return backward(model, xs, a, dz, nullptr, nullptr);
}

Vector logit_input_gradient(const MlpModel& model, const Vector& xs) {
    const auto a = run(model, xs, nullptr, nullptr);
    const Vector dh2 = model.w3.transpose();
    const Vector da2 = (a.a2.array() > 0.0).select(dh2.array(), 0.0).matrix();
    const Vector dh1 = model.w2.transpose() * da2;
    const Vector da1 = (a.a1.array() > 0.0).select(dh1.array(), 0.0).matrix();
    return model.w1.transpose() * da1;
}

double bce_loss(const MlpModel& model, const Matrix& rows, const std::vector<int>& labels) {
    if (static_cast<std::size_t>(rows.rows()) != labels.size() || labels.empty()) {
        throw ValidationError("need one label per row");
    }
    double total = 0.0;
    for (Eigen::Index i = 0; i < rows.rows(); ++i) {
        total += bce_from_logit(logit(model, rows.row(i).transpose()), labels[static_cast<std::size_t>(i)]);
    }
    return total / static_cast<double>(rows.rows());
}

void TrainConfig::validate() const {
    if (!(lr > 0.0)) {
        throw ValidationError("learning rate must be positive");
    }
    if (batch_size < 1) {
        throw ValidationError("batch size must be at least 1");
    }
    if (max_epochs < 0) {
        throw ValidationError("max_epochs must be non-negative");
    }
    if (patience < 1) {
        throw ValidationError("patience must be at least 1");
    }
    if (!(val_fraction > 0.0 && val_fraction < 1.0)) {
        throw ValidationError("val_fraction must lie in (0, 1)");
    }
    if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0) || !(eps > 0.0)) {
        throw ValidationError("invalid Adam constants");
    }
    if (!(dropout >= 0.0 && dropout < 1.0)) {
        throw ValidationError("dropout rate must lie in [0, 1)");
    }
}

std::string format_train_config(const TrainConfig& c) {
    json j = {{"lr", c.lr},          {"batch_size", c.batch_size}, {"max_epochs", c.max_epochs},
              {"patience", c.patience}, {"val_fraction", c.val_fraction}, {"seed", c.seed},
              {"beta1", c.beta1},    {"beta2", c.beta2},           {"eps", c.eps},
              {"dropout", c.dropout}};
    return j.dump(2) + "\n";
}

TrainConfig parse_train_config(std::string_view text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ValidationError(std::string("training config JSON: ") + e.what());
    }
    if (!j.is_object()) {
        throw ValidationError("training config JSON must be an object");
    }
    static const std::set<std::string> known{"lr",           "batch_size", "max_epochs", "patience", "val_fraction",
                                             "seed",         "beta1",      "beta2",      "eps",      "dropout"};
    for (const auto& [key, value] : j.items()) {
        if (!known.count(key)) {
            throw ValidationError("training config JSON has unknown key '" + key + "'");
        }
    }
    TrainConfig c;
    try {
        c.lr = j.value("lr", c.lr);
        c.batch_size = j.value("batch_size", c.batch_size);
        c.max_epochs = j.value("max_epochs", c.max_epochs);
        c.patience = j.value("patience", c.patience);
        c.val_fraction = j.value("val_fraction", c.val_fraction);
        c.seed = j.value("seed", c.seed);
        c.beta1 = j.value("beta1", c.beta1);
        c.beta2 = j.value("beta2", c.beta2);
        c.eps = j.value("eps", c.eps);
        c.dropout = j.value("dropout", c.dropout);
    } catch (const json::exception& e) {
        throw ValidationError(std::string("training config JSON: ") + e.what());
    }
    c.validate();
    return c;
}

namespace {

struct Adam {
    Gradients m, v;
    long t = 0;
};

void adam_step(MlpModel& model, Adam& st, const Gradients& g, const TrainConfig& c) {
    ++st.t;
    const double bc1 = 1.0 - std::pow(c.beta1, static_cast<double>(st.t));
    const double bc2 = 1.0 - std::pow(c.beta2, static_cast<double>(st.t));
    auto update = [&](auto& param, auto& m, auto& v, const auto& grad) {
        m = c.beta1 * m + (1.0 - c.beta1) * grad;
        v = c.beta2 * v + (1.0 - c.beta2) * grad.cwiseProduct(grad);
        param -= (c.lr * (m / bc1).array() / ((v / bc2).array().sqrt() + c.eps)).matrix();
    };
    update(model.w1, st.m.w1, st.v.w1, g.w1);
    update(model.b1, st.m.b1, st.v.b1, g.b1);
    update(model.w2, st.m.w2, st.v.w2, g.w2);
    update(model.b2, st.m.b2, st.v.b2, g.b2);
    update(model.w3, st.m.w3, st.v.w3, g.w3);
    st.m.b3 = c.beta1 * st.m.b3 + (1.0 - c.beta1) * g.b3;
    st.v.b3 = c.beta2 * st.v.b3 + (1.0 - c.beta2) * g.b3 * g.b3;
    model.b3 -= c.lr * (st.m.b3 / bc1) / (std::sqrt(st.v.b3 / bc2) + c.eps);
}

void shuffle(std::vector<std::size_t>& v, Random& rng) {
    for (std::size_t k = v.size(); k > 1; --k) {
        std::swap(v[k - 1], v[rng.index(k)]);
    }
}

} // namespace

TrainResult train(const Matrix& rows, const std::vector<int>& labels, const std::vector<std::string>& names,
                  const TrainConfig& config) {
    config.validate();
    if (static_cast<std::size_t>(rows.rows()) != labels.size()) {
        throw ValidationError("need one label per row");
    }
    if (static_cast<std::size_t>(rows.cols()) != names.size()) {
        throw ValidationError("need one name per feature column");
    }
    if (!rows.allFinite()) {
        throw ValidationError("training features must be finite");
    }
    std::vector<std::size_t> by_class[2];
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] != 0 && labels[i] != 1) {
            throw ValidationError("labels must be 0 or 1");
        }
        by_class[labels[i]].push_back(i);
    }
    if (by_class[0].size() < 2 || by_class[1].size() < 2) {
        throw ValidationError("training needs at least two samples of each class");
    }

    Random rng(config.seed);
    TrainResult result;
    for (auto& cls : by_class) {
        shuffle(cls, rng);
        auto n_val = static_cast<std::size_t>(std::lround(config.val_fraction * static_cast<double>(cls.size())));
        n_val = std::clamp<std::size_t>(n_val, 1, cls.size() - 1);
        result.val_rows.insert(result.val_rows.end(), cls.begin(), cls.begin() + static_cast<std::ptrdiff_t>(n_val));
        result.train_rows.insert(result.train_rows.end(), cls.begin() + static_cast<std::ptrdiff_t>(n_val), cls.end());
    }
    std::sort(result.val_rows.begin(), result.val_rows.end());
    std::sort(result.train_rows.begin(), result.train_rows.end());

    Matrix train_raw(static_cast<Eigen::Index>(result.train_rows.size()), rows.cols());
    std::vector<int> train_y;
    for (std::size_t k = 0; k < result.train_rows.size(); ++k) {
        train_raw.row(static_cast<Eigen::Index>(k)) = rows.row(static_cast<Eigen::Index>(result.train_rows[k]));
        train_y.push_back(labels[result.train_rows[k]]);
    }
    Matrix val_raw(static_cast<Eigen::Index>(result.val_rows.size()), rows.cols());
    std::vector<int> val_y;
    for (std::size_t k = 0; k < result.val_rows.size(); ++k) {
        val_raw.row(static_cast<Eigen::Index>(k)) = rows.row(static_cast<Eigen::Index>(result.val_rows[k]));
        val_y.push_back(labels[result.val_rows[k]]);
    }

    MlpModel model = he_init(names, fit_standardizer(train_raw), config.dropout, rng);
    model.config_hash = sha256_hex(format_train_config(config));
    const Matrix train_x = model.standardizer.apply_rows(train_raw);
    const Matrix val_x = model.standardizer.apply_rows(val_raw);

    auto val_loss = [&](const MlpModel& m) {
        double total = 0.0;
        for (Eigen::Index i = 0; i < val_x.rows(); ++i) {
            total += bce_from_logit(logit_standardized(m, val_x.row(i).transpose()), val_y[static_cast<std::size_t>(i)]);
        }
        return total / static_cast<double>(val_x.rows());
    };

    result.model = model;
    double best = std::numeric_limits<double>::infinity();
    int waited = 0;
    Adam adam{Gradients::zeros_like(model), Gradients::zeros_like(model), 0};
    std::vector<std::size_t> order(static_cast<std::size_t>(train_x.rows()));
    std::iota(order.begin(), order.end(), std::size_t{0});
    for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
        shuffle(order, rng);
        double epoch_loss = 0.0;
        for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
            const std::size_t end = std::min(order.size(), start + config.batch_size);
            Gradients g = Gradients::zeros_like(model);
            for (std::size_t k = start; k < end; ++k) {
                const Vector xs = train_x.row(static_cast<Eigen::Index>(order[k])).transpose();
                const int y = train_y[order[k]];
                Vector m1, m2;
                const Vector* p1 = nullptr;
                const Vector* p2 = nullptr;
                if (model.dropout > 0.0) {
                    m1 = dropout_mask(rng, kHidden1, model.dropout);
                    m2 = dropout_mask(rng, kHidden2, model.dropout);
                    p1 = &m1;
                    p2 = &m2;
                }
                const auto a = run(model, xs, p1, p2);
                epoch_loss += bce_from_logit(a.z, y);
                g += backward(model, xs, a, sigmoid(a.z) - static_cast<double>(y), p1, p2);
            }
            g *= 1.0 / static_cast<double>(end - start);
            adam_step(model, adam, g, config);
        }
        const double vl = val_loss(model);
        result.log.push_back({epoch, epoch_loss / static_cast<double>(order.size()), vl});
        if (vl < best) {
            best = vl;
            result.model = model;
            result.best_epoch = epoch;
            waited = 0;
        } else if (++waited >= config.patience) {
            break;
        }
    }
    return result;
}

std::vector<int> predict_labels(const MlpModel& model, const Matrix& rows) {
    std::vector<int> out;
    out.reserve(static_cast<std::size_t>(rows.rows()));
    for (Eigen::Index i = 0; i < rows.rows(); ++i) {
        out.push_back(forward(model, rows.row(i).transpose()) >= 0.5 ? 1 : 0);
    }
    return out;
}

double accuracy(const MlpModel& model, const Matrix& rows, const std::vector<int>& labels) {
    if (static_cast<std::size_t>(rows.rows()) != labels.size() || labels.empty()) {
        throw ValidationError("need one label per row");
    }
    const auto pred = predict_labels(model, rows);
    std::size_t hits = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        hits += pred[i] == labels[i] ? 1 : 0;
    }
    return static_cast<double>(hits) / static_cast<double>(labels.size());
}

namespace {

json matrix_json(const Matrix& m) {
    json rows = json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        std::vector<double> row(static_cast<std::size_t>(m.cols()));
        for (Eigen::Index c = 0; c < m.cols(); ++c) {
            row[static_cast<std::size_t>(c)] = m(r, c);
        }
        rows.push_back(row);
    }
    return rows;
}

Matrix matrix_from(const json& j, Eigen::Index cols_if_empty) {
    const auto rows = j.get<std::vector<std::vector<double>>>();
    const std::size_t cols = rows.empty() ? static_cast<std::size_t>(cols_if_empty) : rows.front().size();
    Matrix m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols));
    for (std::size_t r = 0; r < rows.size(); ++r) {
        if (rows[r].size() != cols) {
            throw ValidationError("model matrix is ragged");
        }
        for (std::size_t c = 0; c < cols; ++c) {
            m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
        }
    }
    return m;
}

json vector_json(const Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Vector vector_from(const json& j) {
    const auto v = j.get<std::vector<double>>();
    return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

} // namespace

std::string format_model(const MlpModel& m) {
    m.validate();
    std::vector<int> keep(m.standardizer.keep.begin(), m.standardizer.keep.end());
    json j;
    j["feature_names"] = m.feature_names;
    j["standardization"] = {{"mean", vector_json(m.standardizer.mean)},
                            {"sd", vector_json(m.standardizer.sd)},
                            {"keep", keep}};
    j["w1"] = matrix_json(m.w1);
    j["b1"] = vector_json(m.b1);
    j["w2"] = matrix_json(m.w2);
    j["b2"] = vector_json(m.b2);
    j["w3"] = matrix_json(m.w3);
    j["b3"] = m.b3;
    j["dropout"] = m.dropout;
    j["config_hash"] = m.config_hash;
    return j.dump(2) + "\n";
}

MlpModel parse_model(std::string_view text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ValidationError(std::string("model JSON: ") + e.what());
    }
    MlpModel m;
    try {
        m.feature_names = j.at("feature_names").get<std::vector<std::string>>();
        const auto& s = j.at("standardization");
        m.standardizer.mean = vector_from(s.at("mean"));
        m.standardizer.sd = vector_from(s.at("sd"));
        for (int k : s.at("keep").get<std::vector<int>>()) {
            m.standardizer.keep.push_back(k ? 1 : 0);
        }
        m.w1 = matrix_from(j.at("w1"), m.standardizer.kept_dim());
        m.b1 = vector_from(j.at("b1"));
        m.w2 = matrix_from(j.at("w2"), kHidden1);
        m.b2 = vector_from(j.at("b2"));
        m.w3 = matrix_from(j.at("w3"), kHidden2);
        m.b3 = j.at("b3").get<double>();
        m.dropout = j.at("dropout").get<double>();
        m.config_hash = j.value("config_hash", std::string());
    } catch (const json::exception& e) {
        throw ValidationError(std::string("model JSON: ") + e.what());
    }
    m.validate();
    return m;
}

void save_model(const MlpModel& model, const std::filesystem::path& path) {
    write_text_atomic(path, format_model(model));
}

MlpModel load_model(const std::filesystem::path& path) { return parse_model(read_text_file(path)); }

std::string format_training_log(const std::vector<EpochLog>& log) {
    std::string out = "epoch\ttrain_loss\tval_loss\n";
    for (const auto& e : log) {
        out += std::to_string(e.epoch) + "\t" + format_double(e.train_loss) + "\t" + format_double(e.val_loss) + "\n";
    }
    return out;
}

} // namespace diagno
