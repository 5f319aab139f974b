"""Regenerates data/toy and data/presets.json. Checks that each question shares
tokens only with its own fact passage, which the stub script relies on."""
import json, csv, re, os
ROOT = os.path.join(os.path.dirname(os.path.abspath(__file__)), "..", "data")
out = os.path.join(ROOT, "toy")

def toks(s):
    s = s.lower()
    s = re.sub(r"[!-/:-@\[-`{-~]", "", s)
    return set(s.split())

# (source, question id, question, fact text, title, answer)
facts = [
 ("local", "local-01", "Which city hosts the Varnel lantern festival?", "Varnel lanterns glow every autumn across Ostbrook.", "Varnel lanterns", "Ostbrook"),
 ("local", "local-02", "Who founded the Quillor bakery?", "Quillor loaves were first baked by Mira Dunhale.", "Quillor", "Mira Dunhale"),
 ("local", "local-03", "What colour is the Brannet town tram?", "Brannet trams wear teal livery.", "Brannet trams", "teal"),
 ("local", "local-04", "In which year did the Pelloway library open?", "Pelloway books became lendable circa 1887.", "Pelloway", "1887"),
 ("local", "local-05", "What is the mascot of the Hollin rowing club?", "Hollin oarsmen carry a heron banner.", "Hollin oarsmen", "heron"),
 ("local", "local-06", "Which street leads to the Carrow observatory?", "Carrow telescopes stand atop Juniper Lane.", "Carrow", "Juniper Lane"),
 ("global", "global-01", "What is the capital of Estaria?", "Estaria governs itself from Velmora.", "Estaria", "Velmora"),
 ("global", "global-02", "Which currency is used in Dravonia?", "Dravonia trades using crowns.", "Dravonia", "crown"),
 ("global", "global-03", "Who wrote the novel Silver Orchard?", "Silver Orchard came from Tomas Reyl.", "Reyl", "Tomas Reyl"),
 ("global", "global-04", "Which river flows through Ostbrook?", "Ostbrook straddles Tamsel waters.", "Tamsel", "Tamsel"),
 ("wiki", "wiki-01", "Who painted the Amberlane mural?", "Amberlane walls were decorated by Ines Koval.", "Amberlane", "Ines Koval"),
 ("wiki", "wiki-02", "What is the tallest peak in the Sorrow range?", "Sorrow summits culminate at Mount Kethra.", "Sorrow", "Mount Kethra"),
 ("wiki", "wiki-03", "Which composer wrote the Gallen suite?", "Gallen movements came from Arvo Lindqvist.", "Gallen", "Arvo Lindqvist"),
 ("wiki", "wiki-04", "When was the Morrow bridge completed?", "Morrow span finished circa 1934.", "Morrow span", "1934"),
 ("sciq", "sciq-01", "What gas do plants absorb during photosynthesis?", "Photosynthesis consumes carbon dioxide.", "Photosynthesis", "carbon dioxide"),
 ("sciq", "sciq-02", "What is the unit of electrical resistance?", "Resistance gets measured using ohms.", "Resistance", "ohm"),
 ("sciq", "sciq-03", "Which planet is known as the red planet?", "Mars appears reddish because iron oxide coats it; people call it red.", "Mars", "Mars"),
 ("sciq", "sciq-04", "What organelle produces ATP in cells?", "Mitochondria generate ATP.", "Mitochondria", "mitochondria"),
 ("bioasq", "bioasq-01", "Which gene is mutated in cystic fibrosis?", "Cystic fibrosis arises from CFTR mutations.", "CFTR", "CFTR"),
 ("bioasq", "bioasq-02", "Which hormone regulates blood glucose?", "Insulin lowers glucose concentrations.", "Insulin", "insulin"),
 ("bioasq", "bioasq-03", "What enzyme does aspirin inhibit?", "Aspirin blocks cyclooxygenase.", "Aspirin", "cyclooxygenase"),
 ("bioasq", "bioasq-04", "Which virus causes shingles?", "Shingles reactivates varicella zoster.", "Shingles", "varicella zoster virus"),
]
# sciq-03 fact deliberately shares "red" with its own question only.

fillers = {
 "local": ["Quaint cobbles line mossy alleys near harbour sheds.", "Weekend markets sell pickled plums and honey.",
           "Fog rolls over slate rooftops most mornings.", "Ferrymen whistle tunes while docking skiffs.", "Chimney swifts nest under eaves."],
 "global": ["Continents drift slowly over geological epochs.", "Trade winds shape maritime shipping lanes.",
            "Population censuses occur each decade across nations.", "Mountain passes link distant valleys.", "Deserts cover roughly one third landmass."],
 "wiki": ["Encyclopedias summarise knowledge alphabetically.", "Stub articles await expansion by volunteers.",
          "Infoboxes list key attributes compactly.", "Citations support verifiability.", "Disambiguation pages separate homonyms."],
 "sciq": ["Velocity combines speed plus direction.", "Magnets attract iron filings.",
          "Evaporation cools liquid surfaces.", "Fossils preserve ancient organisms.", "Tectonic plates collide forming mountains."],
 "bioasq": ["Randomised trials reduce selection bias.", "Cohort studies follow participants longitudinally.",
            "Biomarkers indicate physiological states.", "Antibodies bind specific antigens.", "Ribosomes translate messenger RNA."],
}

docs = {s: [] for s in fillers}
for s, fl in fillers.items():
    for i, t in enumerate(fl):
        docs[s].append({"id": f"{s}-{i:03d}", "title": "", "text": t})
for s, qid, q, fact, title, ans in facts:
    docs[s].append({"id": f"{s}-fact-{qid.split('-')[1]}", "title": title, "text": fact})

multi = ("local-07", "Which river flows through the city that hosts the Varnel lantern festival?",
         [("1 | - | Which city hosts the Varnel lantern festival?"), ("2 | 1 | Which river flows through {ans:1}?")], "Tamsel")

# overlap check: each (sub)question matches only its own fact doc
all_docs = [(s, d) for s in docs for d in docs[s]]
for s, qid, q, fact, title, ans in facts:
    for s2, d in all_docs:
        ov = toks(q) & (toks(d["text"]) | toks(d["title"]))
        own = d["text"] == fact
        if bool(ov) != own and not (qid == "global-04" and d["id"] == "local-fact-01"):
            raise SystemExit(f"overlap {qid} {d['id']} {ov}")

def write_json(name, s):
    recs = []
    for d in docs[s]:
        r = {"id": d["id"], "text": d["text"]}
        if d["title"]: r["title"] = d["title"]
        recs.append(r)
    with open(os.path.join(out, name), "w") as f:
        json.dump(recs, f, indent=2); f.write("\n")

write_json("local.json", "local"); write_json("global.json", "global"); write_json("wiki.json", "wiki"); write_json("bioasq.json", "bioasq")
with open(os.path.join(out, "sciq.csv"), "w", newline="") as f:
    w = csv.writer(f, lineterminator="\n"); w.writerow(["id", "title", "text"])
    for d in docs["sciq"]: w.writerow([d["id"], d["title"], d["text"]])

def item(qid, q, ans, src):
    return {"id": qid, "question": q, "answers": [ans], "gold_source": src}
byid = {f[1]: f for f in facts}
def ds(name, ids, extra=()):
    with open(os.path.join(out, name), "w") as f:
        for i in ids:
            s, qid, q, fact, title, ans = byid[i]
            f.write(json.dumps(item(qid, q, ans, s)) + "\n")
        for e in extra: f.write(json.dumps(e) + "\n")
ds("two_source.jsonl", [f"local-0{i}" for i in range(1,7)] + [f"global-0{i}" for i in range(1,4)],
   [item(multi[0], multi[1], multi[3], "local")])
ds("three_source.jsonl", [f"{s}-0{i}" for s in ("wiki","sciq","bioasq") for i in range(1,5)])
ds("four_source.jsonl", ["local-01","local-02","global-01","global-02","sciq-01","sciq-02","sciq-03","bioasq-01","bioasq-02","bioasq-03"])

route_to = {"local": "global", "global": "global", "wiki": "wiki", "sciq": "sciq", "bioasq": "bioasq"}
rules = []
def decomp(q, lines):
    rules.append({"pattern": f"QUESTION:\n{q}\n\nOutput one sub-question", "reply": "\n".join(lines)})
def route(q, src):
    rules.append({"pattern": f"QUERY:\n{q}\n", "reply": src})
for s, qid, q, fact, title, ans in facts:
    decomp(q, [f"1 | - | {q}"])
decomp(multi[1], multi[2])
rules.append({"pattern": "2. Which river flows through Ostbrook? -> Tamsel", "reply": multi[3]})
for s, qid, q, fact, title, ans in facts:
    route(q, route_to[s])
# global-04 evidence also carries the local-01 passage (shared "ostbrook"), so its rule goes first.
for s, qid, q, fact, title, ans in sorted(facts, key=lambda f: f[1] != "global-04"):
    rules.append({"pattern": fact, "reply": f"ANSWER: {ans}\nREASONING: The passage about {title} states it.\nSUFFICIENT: yes"})
rules.append({"pattern": "You are a routing assistant", "reply": "global"})
rules.append({"pattern": "You are a relevance judge", "reply": "5"})
rules.append({"pattern": "EVIDENCE:", "reply": "ANSWER: unknown\nREASONING: None of the passages address the question.\nSUFFICIENT: no"})
rules.append({"pattern": "SUB-QUESTION ANSWERS", "reply": "unknown"})
rules.append({"pattern": "question decomposition assistant", "reply": "not a plan"})
with open(os.path.join(out, "stub.json"), "w") as f:
    json.dump({"rules": rules}, f, indent=2); f.write("\n")

presets = {"presets": {
  "two-source": {"description": "Local and global knowledge (2 sources)", "dataset": "toy/two_source.jsonl", "sources": [
     {"name": "local", "profile": "Local knowledge: town events, shops, clubs and landmarks", "file": "toy/local.json"},
     {"name": "global", "profile": "Global knowledge: countries, currencies, literature and geography", "file": "toy/global.json"}]},
  "three-source": {"description": "Encyclopedia, science exam and biomedical QA (3 sources)", "dataset": "toy/three_source.jsonl", "sources": [
     {"name": "wiki", "profile": "Encyclopedia articles about art, places, music and buildings", "file": "toy/wiki.json"},
     {"name": "sciq", "profile": "Science exam QA: physics, chemistry, biology and astronomy", "file": "toy/sciq.csv", "format": "csv"},
     {"name": "bioasq", "profile": "Biomedical literature: genes, hormones, drugs and diseases", "file": "toy/bioasq.json"}]},
  "four-source": {"description": "Local, global, science and biomedical (4 sources)", "dataset": "toy/four_source.jsonl", "sources": [
     {"name": "local", "profile": "Local knowledge: town events, shops, clubs and landmarks", "file": "toy/local.json"},
     {"name": "global", "profile": "Global knowledge: countries, currencies, literature and geography", "file": "toy/global.json"},
     {"name": "sciq", "profile": "Science exam QA: physics, chemistry, biology and astronomy", "file": "toy/sciq.csv", "format": "csv"},
     {"name": "bioasq", "profile": "Biomedical literature: genes, hormones, drugs and diseases", "file": "toy/bioasq.json"}]},
}}
with open(os.path.join(ROOT, "presets.json"), "w") as f:
    json.dump(presets, f, indent=2); f.write("\n")
print("ok")
