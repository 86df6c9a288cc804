#include "flowbench/synth.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "flowbench/rng.hpp"

namespace flowbench {

namespace {

struct Family {
    const char* name;
    ClassParams tmpl;
};

// Family templates sit far apart; members get small offsets below.
ClassParams family_template(double iat_mu, double iat_sigma, double small_mean, double small_sd,
                            double large_mean, double large_sd, double large_frac, double su2d,
                            double sd2u, double packets, double ack) {
    ClassParams p;
    p.iat_mu = iat_mu;
    p.iat_sigma = iat_sigma;
    p.small_mean = small_mean;
    p.small_sd = small_sd;
    p.large_mean = large_mean;
    p.large_sd = large_sd;
    p.large_frac = large_frac;
    p.sw_up_to_down = su2d;
    p.sw_down_to_up = sd2u;
    p.packets_mean = packets;
    p.ack_prob = ack;
    return p;
}

struct Member {
    const char* service;
    const char* category;
    std::vector<std::string> hosts;
};

ClassParams offset_member(const ClassParams& tmpl, double u) {
    ClassParams p = tmpl;
    p.iat_mu += 0.35 * u;
    p.iat_sigma *= 1.0 + 0.15 * u;
    p.small_mean *= 1.0 + 0.15 * u;
    // Members must stay inside the ranges shift_params clamps to, or a zero
    // shift would not be an exact no-op for out-of-range classes.
    p.large_mean = std::clamp(p.large_mean * (1.0 + 0.08 * u), 60.0, 1450.0);
    p.large_frac = std::clamp(p.large_frac + 0.08 * u, 0.05, 0.95);
    p.sw_up_to_down = std::clamp(p.sw_up_to_down + 0.08 * u, 0.05, 0.95);
    p.sw_down_to_up = std::clamp(p.sw_down_to_up - 0.06 * u, 0.05, 0.95);
    p.packets_mean = std::max(p.packets_mean * (1.0 + 0.2 * u), 40.0);
    return p;
}

void emit_family(std::vector<ClassParams>& out, const ClassParams& tmpl,
                 const std::vector<Member>& members) {
    const std::size_t g = members.size();
    for (std::size_t i = 0; i < g; ++i) {
        const double u = g == 1 ? 0.0
                                : -1.0 + 2.0 * static_cast<double>(i) /
                                             static_cast<double>(g - 1);
        ClassParams p = offset_member(tmpl, u);
        p.service = members[i].service;
        p.category = members[i].category;
        p.hostnames = members[i].hosts;
        out.push_back(std::move(p));
    }
}

void validate_params(const ClassParams& p) {
    const bool ok = !p.service.empty() && !p.hostnames.empty() && p.iat_sigma > 0 &&
                    p.small_mean > 0 && p.small_sd >= 0 && p.large_mean > 0 && p.large_sd >= 0 &&
                    p.large_frac >= 0 && p.large_frac <= 1 && p.sw_up_to_down > 0 &&
                    p.sw_up_to_down < 1 && p.sw_down_to_up > 0 && p.sw_down_to_up < 1 &&
                    p.packets_mean >= 1 && p.ack_prob >= 0 && p.ack_prob < 1;
    if (!ok)
        throw std::invalid_argument("invalid generator parameters for class '" + p.service + "'");
}

}  // namespace

std::vector<ClassParams> synth_base_classes() {
    std::vector<ClassParams> out;
    out.reserve(25);

    emit_family(out,
                family_template(-3.9, 0.6, 120, 35, 1150, 140, 0.55, 0.55, 0.35, 70, 0.15),
                {{"facebook-web", "social-media", {"www.facebook.com", "web.facebook.com"}},
                 {"facebook-video", "video", {"video.facebook.com", "video.fbcdn.net"}},
                 {"facebook-messenger",
                  "messaging",
                  {"edge-chat.facebook.com", "www.messenger.com"}},
                 {"instagram", "social-media", {"www.instagram.com", "scontent.cdninstagram.com"}}});

    emit_family(out, family_template(-3.0, 0.8, 90, 30, 1350, 100, 0.45, 0.45, 0.40, 60, 0.15),
                {{"google-search", "search", {"www.google.com", "google.com"}},
                 {"google-ads", "ads", {"ads.google.com", "www.doubleclick.net"}},
                 {"google-play", "appstore", {"play.google.com", "play.googleapis.com"}},
                 {"google-drive", "storage", {"drive.google.com", "docs.google.com"}},
                 {"google-fonts", "fonts", {"fonts.googleapis.com", "fonts.gstatic.com"}},
                 {"youtube", "video", {"www.youtube.com", "youtubei.googleapis.com"}}});

    emit_family(out, family_template(-2.1, 0.5, 160, 50, 900, 180, 0.35, 0.30, 0.45, 50, 0.20),
                {{"office-365", "productivity", {"www.office365.com", "portal.office.com"}},
                 {"outlook", "mail", {"outlook.office365.com", "outlook.live.com"}}});

    emit_family(out, family_template(-4.8, 1.0, 70, 20, 1400, 80, 0.65, 0.65, 0.25, 80, 0.10),
                {{"apple-web", "web", {"www.apple.com", "store.apple.com"}},
                 {"apple-itunes", "music", {"itunes.apple.com", "music.apple.com"}},
                 {"apple-icloud", "cloud", {"www.icloud.com", "setup.icloud.com"}}});

    emit_family(out, family_template(-1.6, 1.2, 200, 60, 700, 200, 0.30, 0.25, 0.55, 45, 0.20),
                {{"netflix", "video", {"www.netflix.com", "occ.nflxvideo.net"}},
                 {"spotify", "music", {"open.spotify.com", "audio.scdn.co"}},
                 {"twitter", "social-media", {"twitter.com", "abs.twimg.com"}},
                 {"tiktok", "video", {"www.tiktok.com", "v16.tiktokcdn.com"}},
                 {"amazon", "shopping", {"www.amazon.com", "images-amazon.com"}},
                 {"dropbox", "storage", {"www.dropbox.com", "content.dropboxapi.com"}},
                 {"steam", "games", {"store.steampowered.com", "cdn.steamcontent.com"}},
                 {"zoom", "conferencing", {"zoom.us", "us04web.zoom.us"}},
                 {"reddit", "forum", {"www.reddit.com", "styles.redditmedia.com"}},
                 {"wikipedia", "encyclopedia", {"en.wikipedia.org", "upload.wikimedia.org"}}});

    return out;
}

std::vector<std::string> synth_class_names() {
    std::vector<std::string> names;
    for (const auto& p : synth_base_classes()) names.push_back(p.service);
    return names;
}

ClassParams shift_params(const ClassParams& base, double shift, std::uint64_t shift_seed) {
    // One fixed-order draw per parameter; shift = 0 reproduces base exactly.
    Rng r(shift_seed ^ fnv1a64(base.service));
    auto u = [&] { return r.uniform(-1.0, 1.0); };
    ClassParams p = base;
    p.iat_mu += shift * 0.8 * u();
    p.iat_sigma *= 1.0 + shift * 0.4 * u();
    p.iat_sigma = std::max(p.iat_sigma, 0.05);
    p.small_mean *= 1.0 + shift * 0.25 * u();
    p.large_mean = std::clamp(p.large_mean * (1.0 + shift * 0.15 * u()), 60.0, 1450.0);
    p.large_frac = std::clamp(p.large_frac + shift * 0.25 * u(), 0.05, 0.95);
    p.sw_up_to_down = std::clamp(p.sw_up_to_down + shift * 0.2 * u(), 0.05, 0.95);
    p.sw_down_to_up = std::clamp(p.sw_down_to_up + shift * 0.2 * u(), 0.05, 0.95);
    p.packets_mean = std::max(p.packets_mean * (1.0 + shift * 0.3 * u()), 40.0);
    p.ack_prob = std::clamp(p.ack_prob + shift * 0.1 * u(), 0.0, 0.4);
    return p;
}

namespace {

Flow generate_flow(const ClassParams& cls, std::size_t idx, bool shifted, const SynthSpec& spec) {
    const std::uint64_t flow_seed = fnv1a64(cls.service) ^
                                    (0x9e3779b97f4a7c15ULL * (static_cast<std::uint64_t>(idx) + 1)) ^
                                    spec.seed ^ (shifted ? 0xd1b54a32d192ed03ULL : 0);
    Rng rng(flow_seed);

    Flow f;
    const char* tag = shifted ? "t" : "s";
    f.id = cls.service + "-" + tag + std::to_string(idx);
    f.sni = cls.hostnames[idx % cls.hostnames.size()];
    f.key.src = "10." + std::to_string(idx % 200) + "." + std::to_string((idx / 200) % 250) +
                ".2:" + std::to_string(40000 + idx % 20000);
    f.key.dst = *f.sni + ":443";
    f.key.proto = "tcp";
    if (spec.attach_labels) f.label = LabelPair{cls.service, cls.category};

    const double len_jitter = std::exp(rng.normal(0.0, 0.25));
    const long n = std::clamp(
        static_cast<long>(std::llround(cls.packets_mean * len_jitter)), 40L,
        static_cast<long>(3.0 * cls.packets_mean) + 40L);

    double t = 0.0;
    Direction dir = Direction::Upstream;
    f.packets.reserve(static_cast<std::size_t>(n));
    for (long i = 0; i < n; ++i) {
        PacketRecord pr;
        pr.timestamp = t;
        pr.dir = dir;
        const bool ack = i > 0 && rng.bernoulli(cls.ack_prob);
        if (ack) {
            pr.packet_size = 40;
            pr.payload_size = 0;
        } else {
            const double big_p =
                dir == Direction::Downstream ? cls.large_frac : cls.large_frac * 0.25;
            const bool big = rng.bernoulli(big_p);
            const double mean = big ? cls.large_mean : cls.small_mean;
            const double sd = big ? cls.large_sd : cls.small_sd;
            const double size = std::clamp(std::round(rng.normal(mean, sd)), 60.0, 1500.0);
            pr.packet_size = static_cast<std::uint32_t>(size);
            pr.payload_size = pr.packet_size - 40;
        }
        f.packets.push_back(pr);

        const double iat = std::clamp(rng.lognormal(cls.iat_mu, cls.iat_sigma), 1e-5, 30.0);
        t += iat;
        const double sw =
            dir == Direction::Upstream ? cls.sw_up_to_down : cls.sw_down_to_up;
        if (rng.bernoulli(sw)) {
            dir = dir == Direction::Upstream ? Direction::Downstream : Direction::Upstream;
        }
    }
    return f;
}

}  // namespace

Dataset synth_dataset(const std::string& name, const SynthSpec& spec, bool shifted) {
    if (spec.flows_per_class == 0)
        throw std::invalid_argument("flows_per_class must be positive");
    Dataset ds;
    ds.name = name;
    ds.collection = "synth";
    const std::vector<ClassParams> base = synth_base_classes();
    ds.items.reserve(base.size() * spec.flows_per_class);
    for (const auto& cls : base) {
        const ClassParams p =
            shifted ? shift_params(cls, spec.shift, spec.shift_seed) : cls;
        validate_params(p);
        for (std::size_t i = 0; i < spec.flows_per_class; ++i) {
            ds.items.push_back(make_item(generate_flow(p, i, shifted, spec)));
        }
    }
    return ds;
}

std::pair<Dataset, Dataset> synth_generate(const SynthSpec& spec) {
    return {synth_dataset("synth-source", spec, false),
            synth_dataset("synth-target", spec, true)};
}

}  // namespace flowbench
