// Copyright 2026 The sllab Authors
// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "sllab/synth.hpp"

#include <array>
#include <cctype>
#include <functional>
#include <random>

#include "sllab/errors.hpp"

namespace sllab {

namespace {

struct Fact {
  const char* subject;
  std::array<const char*, 3> slots;
};

struct Template {
  const char* question;
  const char* answer;
};

struct DomainSpec {
  const char* name;
  std::vector<Fact> facts;
  std::vector<Template> templates;
};

// Placeholders: {s} subject, {0} {1} {2} fact slots.
const std::vector<DomainSpec>& specs() {
  static const std::vector<DomainSpec> table = {
      {"medical",
       {
           {"fever", {"paracetamol", "hypothalamus", "chills"}},
           {"migraine", {"sumatriptan", "cortex", "nausea"}},
           {"asthma", {"salbutamol", "bronchi", "wheezing"}},
           {"anemia", {"ferrous tablets", "marrow", "pallor"}},
           {"eczema", {"emollients", "epidermis", "itching"}},
           {"gout", {"colchicine", "toes", "swelling"}},
           {"angina", {"nitroglycerin", "myocardium", "tightness"}},
           {"bronchitis", {"expectorants", "airways", "phlegm"}},
           {"insomnia", {"melatonin", "pineal gland", "restlessness"}},
           {"jaundice", {"phototherapy", "liver", "yellowing"}},
           {"scurvy", {"ascorbate", "gums", "bruising"}},
           {"tetanus", {"antitoxin", "nerves", "spasms"}},
       },
       {
           {"which remedy relieves {s}?", "{0} relieves {s}."},
           {"which organ does {s} afflict?", "{s} afflicts {1}."},
           {"main symptom seen with {s}?", "{s} shows {2}."},
           {"how should patients manage {s}?", "patients take {0} daily."},
       }},
      {"genetic",
       {
           {"CFTR", {"seven", "cystic fibrosis", "autosomal recessive"}},
           {"HBB", {"eleven", "sickle cell disease", "autosomal recessive"}},
           {"HTT", {"four", "huntington chorea", "autosomal dominant"}},
           {"DMD", {"xchrom", "duchenne dystrophy", "xlinked recessive"}},
           {"FBN1", {"fifteen", "marfan syndrome", "autosomal dominant"}},
           {"F8", {"xchrom", "hemophilia", "xlinked recessive"}},
           {"PAH", {"twelve", "phenylketonuria", "autosomal recessive"}},
           {"NF1", {"seventeen", "neurofibromatosis", "autosomal dominant"}},
           {"SMN1", {"five", "spinal muscular atrophy", "autosomal recessive"}},
           {"MECP2", {"xchrom", "rett syndrome", "xlinked dominant"}},
           {"HEXA", {"fifteen", "tay sachs", "autosomal recessive"}},
           {"PKD1", {"sixteen", "polycystic kidney", "autosomal dominant"}},
       },
       {
           {"locate gene {s}.", "gene {s} resides on chromosome {0}."},
           {"mutations in {s} produce what?", "{s} mutations produce {1}."},
           {"what inheritance pattern governs {1}?", "{1} follows {2} inheritance."},
           {"identify gene behind {1}.", "{1} traces to {s}."},
       }},
      {"legal",
       {
           {"tort", {"civil wrong causing injury", "county court", "claimant"}},
           {"estoppel", {"bar against contradicting prior assertions", "chancery", "defendant"}},
           {"habeas corpus", {"writ demanding lawful detention grounds", "high court", "detainee"}},
           {"mens rea", {"guilty mind accompanying offense", "crown court", "prosecutor"}},
           {"voir dire", {"preliminary examination by jurors", "trial court", "counsel"}},
           {"laches", {"unreasonable delay barring equitable relief", "equity court", "respondent"}},
           {"subpoena", {"order compelling witness attendance", "magistrates", "litigant"}},
           {"easement", {"right over another landholding", "land tribunal", "landowner"}},
           {"affidavit", {"sworn written statement", "registry", "deponent"}},
           {"injunction", {"order restraining conduct", "superior court", "plaintiff"}},
           {"indictment", {"formal criminal accusation", "grand jury", "accused"}},
           {"bailment", {"delivery entrusting goods", "commercial court", "bailor"}},
       },
       {
           {"define {s}.", "{s} denotes {0}."},
           {"where do litigants invoke {s}?", "litigants invoke {s} before {1}."},
           {"who may plead {s}?", "{2} may plead {s}."},
           {"explain {s} briefly.", "{s} means {0}."},
       }},
  };
  return table;
}

std::string fill(const char* pattern, const Fact& fact) {
  std::string out;
  for (const char* p = pattern; *p != '\0'; ++p) {
    if (*p == '{' && p[1] != '\0' && p[2] == '}') {
      switch (p[1]) {
        case 's': out += fact.subject; break;
        case '0': out += fact.slots[0]; break;
        case '1': out += fact.slots[1]; break;
        case '2': out += fact.slots[2]; break;
        default: throw ContractError("bad template placeholder");
      }
      p += 2;
    } else {
      out.push_back(*p);
    }
  }
  return out;
}

}  // namespace

const std::vector<std::string>& synthetic_domains() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> out;
    for (const DomainSpec& s : specs()) out.emplace_back(s.name);
    return out;
  }();
  return names;
}

std::vector<QARecord> generate_synthetic(std::string_view domain, std::size_t count,
                                         std::uint64_t seed) {
  const DomainSpec* spec = nullptr;
  std::size_t domain_index = 0;
  for (std::size_t i = 0; i < specs().size(); ++i) {
    if (domain == specs()[i].name) {
      spec = &specs()[i];
      domain_index = i;
    }
  }
  if (spec == nullptr) throw ConfigError("unknown synthetic domain: " + std::string(domain));

  std::seed_seq seq{seed, static_cast<std::uint64_t>(domain_index)};
  std::mt19937_64 rng(seq);
  std::uniform_int_distribution<std::size_t> pick_fact(0, spec->facts.size() - 1);
  std::uniform_int_distribution<std::size_t> pick_template(0, spec->templates.size() - 1);
  std::vector<QARecord> records;
  records.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    const Fact& fact = spec->facts[pick_fact(rng)];
    const Template& tmpl = spec->templates[pick_template(rng)];
    records.push_back({spec->name, fill(tmpl.question, fact), fill(tmpl.answer, fact), i});
  }
  return records;
}

std::set<std::string> word_types(const std::vector<QARecord>& records) {
  std::set<std::string> words;
  auto scan = [&](const std::string& text) {
    std::string cur;
    for (char c : text) {
      const auto u = static_cast<unsigned char>(c);
      if (std::isalnum(u)) {
        cur.push_back(static_cast<char>(std::tolower(u)));
      } else if (!cur.empty()) {
        words.insert(cur);
        cur.clear();
      }
    }
    if (!cur.empty()) words.insert(cur);
  };
  for (const QARecord& r : records) {
    scan(r.question);
    scan(r.answer);
  }
  return words;
}

}  // namespace sllab
