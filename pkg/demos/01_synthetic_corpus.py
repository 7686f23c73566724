"""Generate the synthetic review corpus and poke at the label grammar.

Run:  python3 demos/01_synthetic_corpus.py
"""

from exrank import Task, generate_synthetic, parse_output, serialize_label, to_atsc

train, test = generate_synthetic(60, 10, seed=0)
print(f"generated {len(train)} train / {len(test)} test samples\n")

print("a few samples with their serialized gold outputs:")
for s in train.samples[:6]:
    print(f"  [{s.id:2d}] {s.text}")
    print(f"       -> {serialize_label(s, Task.ASPE)}")

print("\nthe grammar survives awkward aspect terms:")
tricky = "asparagus, truffle oil, parmesan bruschetta: positive"
labels = parse_output(tricky, Task.ASPE)
print(f"  {tricky!r}")
print(f"  parses to {[(l.term, l.polarity.value) for l in labels]}")

print("\nround trip over the whole corpus:")
ok = all(
    parse_output(serialize_label(s, Task.ASPE), Task.ASPE) == s.labels
    for s in train.samples + test.samples
)
print(f"  parse(serialize(s)) == s.labels for all samples: {ok}")

atsc = to_atsc(train)
print(f"\nATSC view: {len(train)} reviews expand to {len(atsc)} "
      f"(one record per designated aspect)")
s = atsc.samples[0]
print(f"  e.g. text={s.text!r} aspect={s.aspect!r} "
      f"-> {serialize_label(s, Task.ATSC)!r}")
