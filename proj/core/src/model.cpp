#include "rcmk/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "rcmk/ops.hpp"

namespace rcmk {

ModelSpec tiny_spec(Variant v) {
    ModelSpec s;
    s.widths = {8, 16, 32};
    s.blocks_per_stage = 1;
    s.variant = v;
    s.num_classes = 10;
    s.in_channels = 1;
    s.in_h = 28;
    s.in_w = 28;
    return s;
}

ModelSpec small_spec(Variant v) {
    ModelSpec s;
    s.widths = {16, 32, 64};
    s.blocks_per_stage = 2;
    s.variant = v;
    s.num_classes = 10;
    s.in_channels = 3;
    s.in_h = 32;
    s.in_w = 32;
    return s;
}

bool operator==(const ModelSpec& a, const ModelSpec& b) {
    return a.widths == b.widths && a.blocks_per_stage == b.blocks_per_stage &&
           a.variant == b.variant && a.num_classes == b.num_classes &&
           a.in_channels == b.in_channels && a.in_h == b.in_h && a.in_w == b.in_w &&
           a.skip_connections == b.skip_connections && a.k == b.k && a.a == b.a &&
           a.tau == b.tau && a.dtype == b.dtype;
}

std::string spec_to_text(const ModelSpec& spec) {
    std::ostringstream os;
    os << "widths = ";
    for (std::size_t i = 0; i < spec.widths.size(); ++i) {
        if (i) os << ",";
        os << spec.widths[i];
    }
    os << "\n";
    os << "blocks_per_stage = " << spec.blocks_per_stage << "\n";
    os << "variant = " << variant_name(spec.variant) << "\n";
    os << "num_classes = " << spec.num_classes << "\n";
    os << "in_channels = " << spec.in_channels << "\n";
    os << "in_h = " << spec.in_h << "\n";
    os << "in_w = " << spec.in_w << "\n";
    os << "skip_connections = " << (spec.skip_connections ? 1 : 0) << "\n";
    os << "k = " << spec.k << "\n";
    os << "a = " << spec.a << "\n";
    os << "tau = " << format_double(spec.tau, 17) << "\n";
    os << "dtype = " << dtype_name(spec.dtype) << "\n";
    return os.str();
}

ModelSpec spec_from_text(const std::string& text) {
    ModelSpec spec;
    std::istringstream is(text);
    std::string line;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        auto eq = line.find(" = ");
        if (eq == std::string::npos) throw ValueError("malformed spec line: " + line);
        std::string key = line.substr(0, eq);
        std::string value = line.substr(eq + 3);
        if (key == "widths") {
            spec.widths.clear();
            std::istringstream vs(value);
            std::string tok;
            while (std::getline(vs, tok, ',')) spec.widths.push_back(std::stoll(tok));
        } else if (key == "blocks_per_stage") {
            spec.blocks_per_stage = std::stoll(value);
        } else if (key == "variant") {
            spec.variant = variant_from_string(value);
        } else if (key == "num_classes") {
            spec.num_classes = std::stoll(value);
        } else if (key == "in_channels") {
            spec.in_channels = std::stoll(value);
        } else if (key == "in_h") {
            spec.in_h = std::stoll(value);
        } else if (key == "in_w") {
            spec.in_w = std::stoll(value);
        } else if (key == "skip_connections") {
            spec.skip_connections = std::stoll(value) != 0;
        } else if (key == "k") {
            spec.k = std::stoll(value);
        } else if (key == "a") {
            spec.a = std::stoll(value);
        } else if (key == "tau") {
            spec.tau = std::stod(value);
        } else if (key == "dtype") {
            if (value == "float32")
                spec.dtype = DType::Float32;
            else if (value == "float64")
                spec.dtype = DType::Float64;
            else
                throw ValueError("unknown dtype '" + value + "'");
        } else {
            throw ValueError("unknown spec key '" + key + "'");
        }
    }
    return spec;
}

namespace {

void visit_model(Model& m, bool buffers,
                 const std::function<void(const std::string&, Tensor&)>& cb) {
    auto visit_bn = [&](const std::string& prefix, NSTState& s) {
        if (!s.gamma.defined()) return;
        if (buffers) {
            cb(prefix + ".running_mean", s.running_mean);
            cb(prefix + ".running_var", s.running_var);
        } else {
            cb(prefix + ".gamma", s.gamma);
            cb(prefix + ".beta", s.beta);
        }
    };
    if (!buffers) cb("stem.weight", m.stem.weight);
    visit_bn("stem_bn", m.stem_bn);
    for (std::size_t si = 0; si < m.stages.size(); ++si)
        for (std::size_t bi = 0; bi < m.stages[si].size(); ++bi) {
            Model::Unit& u = m.stages[si][bi];
            std::string prefix =
                "stage" + std::to_string(si) + ".unit" + std::to_string(bi);
            auto site_cb = [&](const std::string& name, Tensor& t) {
                cb(prefix + ".site." + name, t);
            };
            if (buffers)
                u.site.visit_buffers(site_cb);
            else
                u.site.visit_params(site_cb);
            visit_bn(prefix + ".bn", u.bn);
            if (u.has_projection) {
                if (!buffers) cb(prefix + ".proj.weight", u.projection.weight);
                visit_bn(prefix + ".proj_bn", u.projection_bn);
            }
        }
    if (!buffers) {
        cb("head.weight", m.head_weight);
        cb("head.bias", m.head_bias);
    }
}

}  // namespace

std::vector<std::pair<std::string, Tensor>> Model::named_params() {
    std::vector<std::pair<std::string, Tensor>> out;
    visit_model(*this, false, [&](const std::string& n, Tensor& t) { out.emplace_back(n, t); });
    return out;
}

std::vector<std::pair<std::string, Tensor>> Model::named_buffers() {
    std::vector<std::pair<std::string, Tensor>> out;
    visit_model(*this, true, [&](const std::string& n, Tensor& t) { out.emplace_back(n, t); });
    return out;
}

std::vector<Tensor> Model::parameters() {
    std::vector<Tensor> out;
    visit_model(*this, false, [&](const std::string&, Tensor& t) { out.push_back(t); });
    return out;
}

std::int64_t Model::param_count() {
    std::int64_t n = 0;
    for (const Tensor& t : parameters()) n += t.numel();
    return n;
}

Model Model::clone() const {
    Model m;
    m.spec = spec;
    m.stem.weight = stem.weight.clone();
    m.stem.stride = stem.stride;
    m.stem.padding = stem.padding;
    m.stem_bn = stem_bn.clone();
    for (const auto& stage : stages) {
        m.stages.emplace_back();
        for (const Unit& u : stage) {
            Unit c;
            c.site = u.site.clone();
            c.bn = u.bn.clone();
            c.has_projection = u.has_projection;
            if (u.has_projection) {
                c.projection.weight = u.projection.weight.clone();
                c.projection.stride = u.projection.stride;
                c.projection.padding = u.projection.padding;
                c.projection_bn = u.projection_bn.clone();
            }
            m.stages.back().push_back(std::move(c));
        }
    }
    m.head_weight = head_weight.clone();
    m.head_bias = head_bias.clone();
    return m;
}

Model build_model(const ModelSpec& spec, std::uint64_t seed) {
    if (spec.widths.empty()) throw ValueError("model needs at least one stage width");
    for (std::int64_t w : spec.widths)
        if (w < 1) throw ValueError("stage widths must be positive");
    if (spec.blocks_per_stage < 1) throw ValueError("blocks_per_stage must be >= 1");
    if (spec.num_classes < 2) throw ValueError("need at least two classes");
    if (spec.in_channels < 1 || spec.in_h < 1 || spec.in_w < 1)
        throw ValueError("input geometry must be positive");

    Model m;
    m.spec = spec;
    {
        Rng rng(mix_seed(seed, "stem.weight"));
        m.stem.weight = he_normal({spec.widths[0], spec.in_channels, 3, 3}, spec.dtype, rng);
        m.stem.weight.set_requires_grad(true);
        m.stem.stride = 1;
        m.stem.padding = 1;
    }
    m.stem_bn = NSTState::create(spec.widths[0], spec.dtype);

    std::int64_t prev = spec.widths[0];
    for (std::size_t si = 0; si < spec.widths.size(); ++si) {
        m.stages.emplace_back();
        for (std::int64_t bi = 0; bi < spec.blocks_per_stage; ++bi) {
            const std::int64_t c_in = bi == 0 ? prev : spec.widths[si];
            const std::int64_t c_out = spec.widths[si];
            const std::int64_t stride = (bi == 0 && si > 0) ? 2 : 1;
            std::string prefix = "stage" + std::to_string(si) + ".unit" + std::to_string(bi);

            RConvConfig cfg;
            cfg.c_in = c_in;
            cfg.c_out = c_out;
            cfg.k = spec.k;
            cfg.a = spec.a;
            cfg.stride = stride;
            cfg.variant = spec.variant;
            cfg.tau = spec.tau;
            cfg.dtype = spec.dtype;

            Model::Unit u;
            u.site = build_block(cfg, mix_seed(seed, prefix + ".site"));
            u.bn = NSTState::create(c_out, spec.dtype);
            if (spec.skip_connections && (c_in != c_out || stride != 1)) {
                u.has_projection = true;
                Rng rng(mix_seed(seed, prefix + ".proj.weight"));
                u.projection.weight = he_normal({c_out, c_in, 1, 1}, spec.dtype, rng);
                u.projection.weight.set_requires_grad(true);
                u.projection.stride = stride;
                u.projection_bn = NSTState::create(c_out, spec.dtype);
            }
            m.stages.back().push_back(std::move(u));
        }
        prev = spec.widths[si];
    }
    {
        Rng rng(mix_seed(seed, "head.weight"));
        m.head_weight = he_normal({prev, spec.num_classes}, spec.dtype, rng);
        m.head_weight.set_requires_grad(true);
        m.head_bias = Tensor::zeros({spec.num_classes}, spec.dtype, true);
    }
    return m;
}

Tensor forward(Model& m, const Tensor& x, Mode mode) {
    if (x.ndim() != 4) throw ShapeError("model input must be NCHW");
    if (x.dim(1) != m.spec.in_channels)
        throw ShapeError("model expected " + std::to_string(m.spec.in_channels) +
                         " input channels, got " + std::to_string(x.dim(1)));
    Tensor h = x.dtype() == m.spec.dtype ? x : x.astype(m.spec.dtype);
    h = relu(batch_norm(conv2d(h, m.stem), m.stem_bn, mode));
    for (auto& stage : m.stages)
        for (Model::Unit& u : stage) {
            Tensor out = batch_norm(block_forward(u.site, h, mode), u.bn, mode);
            if (m.spec.skip_connections) {
                Tensor sc = u.has_projection
                                ? batch_norm(conv2d(h, u.projection), u.projection_bn, mode)
                                : h;
                h = relu(add(out, sc));
            } else {
                h = relu(out);
            }
        }
    Tensor pooled = global_avg_pool(h);
    return add(matmul(pooled, m.head_weight), m.head_bias);
}

EvalReport evaluate(Model& m, const Dataset& ds, std::int64_t batch_size, int workers) {
    const std::int64_t n = ds.size();
    if (n == 0) throw ValueError("evaluate on an empty dataset");
    if (batch_size < 1) throw ValueError("batch_size must be >= 1");
    const std::int64_t nb = (n + batch_size - 1) / batch_size;
    const std::int64_t k = m.spec.num_classes;
    const bool want_top5 = k >= 5;

    std::vector<double> loss_sum(static_cast<std::size_t>(nb), 0.0);
    std::vector<std::int64_t> top1(static_cast<std::size_t>(nb), 0);
    std::vector<std::int64_t> top5(static_cast<std::size_t>(nb), 0);

    parallel_for(nb, workers, [&](std::int64_t lo, std::int64_t hi) {
        NoGradGuard guard;
        for (std::int64_t bi = lo; bi < hi; ++bi) {
            std::int64_t begin = bi * batch_size;
            std::int64_t end = std::min(n, begin + batch_size);
            std::vector<std::int64_t> idx(static_cast<std::size_t>(end - begin));
            std::iota(idx.begin(), idx.end(), begin);
            Tensor batch = gather_batch(ds, idx);
            Tensor logits = forward(m, batch, Mode::Eval);
            for (std::int64_t r = 0; r < end - begin; ++r) {
                const std::int32_t label = ds.labels[static_cast<std::size_t>(begin + r)];
                double z_label = logits.value_at(r * k + label);
                double mx = logits.value_at(r * k);
                std::int64_t arg = 0, above = 0;
                double lse = 0.0;
                for (std::int64_t j = 1; j < k; ++j) {
                    double z = logits.value_at(r * k + j);
                    if (z > mx) {
                        mx = z;
                        arg = j;
                    }
                }
                for (std::int64_t j = 0; j < k; ++j) {
                    double z = logits.value_at(r * k + j);
                    lse += std::exp(z - mx);
                    if (z > z_label) ++above;
                }
                lse = mx + std::log(lse);
                loss_sum[static_cast<std::size_t>(bi)] += lse - z_label;
                if (arg == label) ++top1[static_cast<std::size_t>(bi)];
                if (above < 5) ++top5[static_cast<std::size_t>(bi)];
            }
        }
    });

    double loss = 0.0;
    std::int64_t c1 = 0, c5 = 0;
    for (std::int64_t bi = 0; bi < nb; ++bi) {
        loss += loss_sum[static_cast<std::size_t>(bi)];
        c1 += top1[static_cast<std::size_t>(bi)];
        c5 += top5[static_cast<std::size_t>(bi)];
    }
    EvalReport r;
    r.count = n;
    r.mean_loss = loss / static_cast<double>(n);
    r.top1_error_percent = 100.0 * (1.0 - static_cast<double>(c1) / static_cast<double>(n));
    if (want_top5)
        r.top5_error_percent = 100.0 * (1.0 - static_cast<double>(c5) / static_cast<double>(n));
    return r;
}

double accuracy_percent(const EvalReport& r) { return 100.0 - r.top1_error_percent; }

}  // namespace rcmk
