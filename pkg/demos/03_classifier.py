"""Hashed bag-of-words logistic regression and uncertainty measures.

Run: python demos/03_classifier.py
"""
import random

from labelloop import featurize, predict, train, uncertainty
from labelloop.classifier import LabelledExample

rng = random.Random(7)
happy = ["works", "relieved", "protects", "grateful", "safe"]
angry = ["hoax", "scared", "refuse", "dangerous", "awful"]


def make(i, words, label):
    text = "vaccine " + " ".join(rng.choice(words) for _ in range(4))
    return LabelledExample(f"d{i}", featurize(text), label)


examples = [make(i, happy, "positive") for i in range(60)]
examples += [make(100 + i, angry, "negative") for i in range(60)]
model = train(examples, seed=1)
print(f"trained model v{model.version} on {model.trained_on} examples, "
      f"classes {model.classes}")

for text in ["the vaccine protects and i am grateful",
             "refuse this dangerous hoax",
             "vaccine appointment tomorrow"]:
    probs = predict(model, featurize(text))
    ranked = sorted(zip(model.classes, probs), key=lambda x: -x[1])
    label, p = ranked[0]
    print(f"  {text!r}")
    print(f"    -> {label} (p={p:.3f}), least-confidence uncertainty "
          f"{uncertainty(probs):.3f}")

print("\nuncertainty measures on a probability vector:")
for probs in ([0.98, 0.01, 0.01], [0.5, 0.3, 0.2], [1 / 3] * 3):
    print(f"  p={probs}: least_confidence={uncertainty(probs):.3f} "
          f"margin={uncertainty(probs, 'margin'):.3f} "
          f"entropy={uncertainty(probs, 'entropy'):.3f}")
