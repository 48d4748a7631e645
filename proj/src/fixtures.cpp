#include "edgnn/fixtures.hpp"

#include <algorithm>
#include <array>
#include <cstdint>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include "edgnn/rng.hpp"

namespace fs = std::filesystem;

namespace edgnn {

namespace {

// Integer list of `count` entries in [lo, hi] summing exactly to `total`.
std::vector<int> partition_total(Rng& rng, int count, int total, int lo, int hi) {
    if (total < count * lo || total > count * hi)
        throw std::logic_error("partition_total: target outside feasible range");
    std::vector<int> out(static_cast<std::size_t>(count));
    int sum = 0;
    for (int& v : out) {
        v = lo + rng.uniform_int(hi - lo + 1);
        sum += v;
    }
    while (sum != total) {
        int i = rng.uniform_int(count);
        int& v = out[static_cast<std::size_t>(i)];
        if (sum < total && v < hi) {
            ++v;
            ++sum;
        } else if (sum > total && v > lo) {
            --v;
            --sum;
        }
    }
    return out;
}

struct MoleculeCorpusSpec {
    int num_graphs = 0;
    int total_nodes = 0;
    int total_bonds = 0;
    int size_lo = 0, size_hi = 0;
    int ring_lo = 0, ring_hi = 0;
    int class1_count = 0;
    std::vector<std::string> node_labels;  // [1]="N", [2]="O" are motif atoms
    std::vector<std::string> edge_labels;  // [0]=aromatic, [1]=single, [2]=double
    int m1_lo = 2, m1_hi = 3;              // motif count range, class "1"
    int m0_lo = 0, m0_hi = 1;              // motif count range, class "-1"
    double flip_prob = 0.0;
    std::uint64_t seed = 0;
};

// One connected molecule: a random backbone tree with `motifs` nitro-like
// N(=O)(=O) groups hanging off it and `rings` extra closures. Returns bonds
// as undirected pairs; the caller emits both orientations.
struct Molecule {
    std::vector<int> labels;
    std::vector<std::tuple<int, int, int>> bonds;  // (u, v, edge_label)
};

Molecule build_molecule(Rng& rng, int n, int rings, int motifs, int num_node_labels) {
    const int backbone = n - 3 * motifs;
    if (backbone < 2) throw std::logic_error("build_molecule: too many motifs for size");
    Molecule m;
    m.labels.assign(static_cast<std::size_t>(n), 0);
    for (int v = 0; v < backbone; ++v) {
        if (rng.bernoulli(0.10) && num_node_labels > 3) {
            // heavy atom from the non-motif tail of the dictionary
            m.labels[static_cast<std::size_t>(v)] = 3 + rng.uniform_int(num_node_labels - 3);
        }
    }
    for (int v = 1; v < backbone; ++v)
        m.bonds.emplace_back(v, rng.uniform_int(v), rng.bernoulli(0.6) ? 0 : 1);
    for (int k = 0; k < motifs; ++k) {
        int nitro = backbone + 3 * k;
        m.labels[static_cast<std::size_t>(nitro)] = 1;      // N
        m.labels[static_cast<std::size_t>(nitro) + 1] = 2;  // O
        m.labels[static_cast<std::size_t>(nitro) + 2] = 2;  // O
        m.bonds.emplace_back(nitro, rng.uniform_int(backbone), 1);
        m.bonds.emplace_back(nitro + 1, nitro, 2);
        m.bonds.emplace_back(nitro + 2, nitro, 2);
    }
    for (int r = 0; r < rings; ++r) {
        int a = rng.uniform_int(backbone);
        int b = rng.uniform_int(backbone);
        for (int tries = 0; tries < 10 && b == a; ++tries) b = rng.uniform_int(backbone);
        if (a == b) b = (a + 1) % backbone;
        m.bonds.emplace_back(a, b, 0);
    }
    return m;
}

GraphDataset make_molecule_corpus(const MoleculeCorpusSpec& spec) {
    Rng rng(spec.seed);
    auto vocab = std::make_shared<LabelVocab>();
    for (const std::string& l : spec.node_labels) vocab->node_labels.intern(l);
    for (const std::string& l : spec.edge_labels) vocab->edge_labels.intern(l);

    std::vector<int> sizes = partition_total(rng, spec.num_graphs, spec.total_nodes,
                                             spec.size_lo, spec.size_hi);
    std::vector<int> rings = partition_total(
        rng, spec.num_graphs, spec.total_bonds - spec.total_nodes + spec.num_graphs,
        spec.ring_lo, spec.ring_hi);

    std::vector<int> classes(static_cast<std::size_t>(spec.num_graphs), 0);
    std::fill(classes.begin(), classes.begin() + spec.class1_count, 1);
    rng.shuffle(classes);

    GraphDataset ds;
    ds.vocab = vocab;
    for (int gi = 0; gi < spec.num_graphs; ++gi) {
        int n = sizes[static_cast<std::size_t>(gi)];
        int cls = classes[static_cast<std::size_t>(gi)];
        int motifs = cls == 1 ? spec.m1_lo + rng.uniform_int(spec.m1_hi - spec.m1_lo + 1)
                              : spec.m0_lo + rng.uniform_int(spec.m0_hi - spec.m0_lo + 1);
        motifs = std::min(motifs, (n - 3) / 3);
        Molecule mol = build_molecule(rng, n, rings[static_cast<std::size_t>(gi)], motifs,
                                      static_cast<int>(spec.node_labels.size()));
        // Guarantee corpus-wide dictionary coverage.
        if (gi < static_cast<int>(spec.node_labels.size())) mol.labels[0] = gi;
        if (gi < static_cast<int>(spec.edge_labels.size()) && !mol.bonds.empty())
            std::get<2>(mol.bonds[0]) = gi;

        std::vector<Edge> edges;
        edges.reserve(mol.bonds.size() * 2);
        for (auto [u, v, l] : mol.bonds) {
            edges.push_back({u, v, l});
            edges.push_back({v, u, l});
        }
        ds.graphs.emplace_back(n, mol.labels, std::move(edges), vocab);
        int recorded = rng.bernoulli(spec.flip_prob) ? 1 - cls : cls;
        ds.graph_labels.push_back(ds.class_dict.intern(recorded == 1 ? "1" : "-1"));
    }
    return ds;
}

struct TripleCorpusSpec {
    int num_entities = 0;
    int num_triples = 0;
    int num_relations = 0;
    int num_classes = 0;
    int num_persons = 0;
    int num_train = 0;
    int depts_per_class = 0;   // department pool size per class
    int marker_edges = 0;      // class-marker decorations per department
    double conf_prob = 0.0;    // extra edge into a wrong-class department
    double label_flip = 0.0;   // recorded class differs from structure
    std::uint64_t seed = 0;
};

// Labeled instances affiliate (all through one shared relation) with
// departments drawn from their class's pool; each department is decorated
// with a class-marker relation. The class is therefore two hops away from
// the instance and never readable from the instance's own degree or
// relation histogram.
void write_triple_corpus(const fs::path& dir, const TripleCorpusSpec& spec) {
    Rng rng(spec.seed);
    const int P = spec.num_persons;
    const int C = spec.num_classes;
    const int H = C * spec.depts_per_class;
    const int F = spec.num_entities - P - H;
    if (F < 2) throw std::logic_error("write_triple_corpus: entity budget too small");
    if (spec.num_relations < 2 + C)
        throw std::logic_error("write_triple_corpus: need one marker relation per class");

    auto person = [](int i) { return i; };
    auto dept = [&](int c, int j) { return P + c * spec.depts_per_class + j; };
    auto filler = [P, H](int j) { return P + H + j; };
    auto name_of = [&](int id) {
        if (id < P) return "inst_" + std::to_string(id);
        if (id < P + H) return "dept_" + std::to_string(id - P);
        return "res_" + std::to_string(id - P - H);
    };
    auto rel_name = [](int r) { return r == 0 ? std::string("affiliatedWith") : "rel_" + std::to_string(r); };
    // Relations 1..C are the class markers; the rest is ambient noise.
    auto noise_rel = [&] { return 1 + C + rng.uniform_int(spec.num_relations - 1 - C); };

    std::vector<std::array<int, 3>> triples;
    triples.reserve(static_cast<std::size_t>(spec.num_triples));
    auto add = [&](int s, int r, int o) { triples.push_back({s, r, o}); };

    // Web of filler resources: every resource appears in at least one triple.
    add(filler(1), noise_rel(), filler(0));
    for (int j = 2; j < F; ++j) add(filler(j), noise_rel(), filler(rng.uniform_int(j)));

    // Department decorations: the class marker plus some ambient edges.
    for (int c = 0; c < C; ++c)
        for (int j = 0; j < spec.depts_per_class; ++j) {
            for (int i = 0; i < spec.marker_edges; ++i)
                add(filler(rng.uniform_int(F)), 1 + c, dept(c, j));
            for (int i = 0; i < 3; ++i) add(dept(c, j), noise_rel(), filler(rng.uniform_int(F)));
        }

    std::vector<int> true_class(static_cast<std::size_t>(P));
    for (int p = 0; p < P; ++p) true_class[static_cast<std::size_t>(p)] = p % C;
    rng.shuffle(true_class);
    for (int p = 0; p < P; ++p) {
        int c = true_class[static_cast<std::size_t>(p)];
        int k = 2 + rng.uniform_int(2);
        for (int i = 0; i < k; ++i) add(person(p), 0, dept(c, rng.uniform_int(spec.depts_per_class)));
        if (C > 1 && rng.bernoulli(spec.conf_prob)) {
            int wrong = (c + 1 + rng.uniform_int(C - 1)) % C;
            add(person(p), 0, dept(wrong, rng.uniform_int(spec.depts_per_class)));
        }
        int extras = 2 + rng.uniform_int(3);
        for (int i = 0; i < extras; ++i) {
            int other = filler(rng.uniform_int(F));
            if (rng.bernoulli(0.5)) add(person(p), noise_rel(), other);
            else add(other, noise_rel(), person(p));
        }
    }

    // Pad with resource-to-resource noise up to the exact triple budget.
    if (static_cast<int>(triples.size()) > spec.num_triples)
        throw std::logic_error("write_triple_corpus: triple budget exceeded before padding");
    while (static_cast<int>(triples.size()) < spec.num_triples) {
        int s = filler(rng.uniform_int(F));
        int o = filler(rng.uniform_int(F));
        if (s == o) o = filler((o - filler(0) + 1) % F);
        add(s, noise_rel(), o);
    }

    fs::create_directories(dir);
    {
        std::ofstream f(dir / "triples.tsv");
        if (!f) throw std::runtime_error("cannot create " + (dir / "triples.tsv").string());
        for (const auto& t : triples)
            f << name_of(t[0]) << "\t" << rel_name(t[1]) << "\t" << name_of(t[2]) << "\n";
    }

    std::vector<int> order(static_cast<std::size_t>(P));
    std::iota(order.begin(), order.end(), 0);
    rng.shuffle(order);
    auto write_split = [&](const fs::path& path, int from, int to) {
        std::ofstream f(path);
        if (!f) throw std::runtime_error("cannot create " + path.string());
        for (int i = from; i < to; ++i) {
            int p = order[static_cast<std::size_t>(i)];
            int c = true_class[static_cast<std::size_t>(p)];
            if (C > 1 && rng.bernoulli(spec.label_flip)) c = (c + 1 + rng.uniform_int(C - 1)) % C;
            f << name_of(p) << "\tclass_" << c << "\n";
        }
    };
    write_split(dir / "train.tsv", 0, spec.num_train);
    write_split(dir / "test.tsv", spec.num_train, P);
}

}  // namespace

GraphDataset make_mutag_like() {
    MoleculeCorpusSpec spec;
    spec.num_graphs = 188;
    spec.total_nodes = 3365;   // avg 17.899
    spec.total_bonds = 3722;   // avg 19.798
    spec.size_lo = 12;
    spec.size_hi = 24;
    spec.ring_lo = 1;
    spec.ring_hi = 5;
    spec.class1_count = 125;
    spec.node_labels = {"C", "N", "O", "F", "I", "Cl"};
    spec.edge_labels = {"aromatic", "single", "double"};
    spec.m1_lo = 3;
    spec.m1_hi = 4;
    spec.m0_lo = 0;
    spec.m0_hi = 0;
    spec.flip_prob = 0.05;
    spec.seed = 0x4d555441470001ULL;
    return make_molecule_corpus(spec);
}

GraphDataset make_ptc_fr_like() {
    MoleculeCorpusSpec spec;
    spec.num_graphs = 351;
    spec.total_nodes = 5125;  // avg 14.601
    spec.total_bonds = 5265;  // avg 15.0
    spec.size_lo = 10;
    spec.size_hi = 20;
    spec.ring_lo = 0;
    spec.ring_hi = 4;
    spec.class1_count = 160;
    spec.node_labels = {"C",  "N",  "O",  "F",  "Cl", "S",  "Br", "P",  "I", "Na",
                        "K",  "Li", "Ca", "Mg", "Zn", "Cu", "B",  "Si", "Se"};
    spec.edge_labels = {"aromatic", "single", "double", "triple"};
    spec.m1_lo = 2;
    spec.m1_hi = 3;
    spec.m0_lo = 0;
    spec.m0_hi = 0;
    spec.flip_prob = 0.25;
    spec.seed = 0x50544346520001ULL;
    return make_molecule_corpus(spec);
}

void write_aifb_like(const fs::path& dir) {
    TripleCorpusSpec spec;
    spec.num_entities = 8285;
    spec.num_triples = 29043;
    spec.num_relations = 45;
    spec.num_classes = 4;
    spec.num_persons = 176;
    spec.num_train = 140;
    spec.depts_per_class = 12;
    spec.marker_edges = 10;
    spec.conf_prob = 0.05;
    spec.label_flip = 0.03;
    spec.seed = 0x414946420001ULL;
    write_triple_corpus(dir, spec);
}

void write_mutag_node_like(const fs::path& dir) {
    TripleCorpusSpec spec;
    spec.num_entities = 23644;
    spec.num_triples = 74227;
    spec.num_relations = 23;
    spec.num_classes = 2;
    spec.num_persons = 340;
    spec.num_train = 272;
    spec.depts_per_class = 16;
    spec.marker_edges = 10;
    spec.conf_prob = 0.10;
    spec.label_flip = 0.10;
    spec.seed = 0x4d55544e4f440001ULL;
    write_triple_corpus(dir, spec);
}

void write_benchmark_fixtures(const fs::path& root) {
    if (!fs::exists(root / "mutag" / "MUTAG_A.txt"))
        save_tu_dataset(make_mutag_like(), root / "mutag", "MUTAG");
    if (!fs::exists(root / "ptc_fr" / "PTC_FR_A.txt"))
        save_tu_dataset(make_ptc_fr_like(), root / "ptc_fr", "PTC_FR");
    if (!fs::exists(root / "aifb" / "triples.tsv")) write_aifb_like(root / "aifb");
    if (!fs::exists(root / "mutag_node" / "triples.tsv")) write_mutag_node_like(root / "mutag_node");
}

}  // namespace edgnn
