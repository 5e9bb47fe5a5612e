"""Reference values for the text-overlap tests, computed with nltk and pycocoevalcap.

Run: python3 tests/oracles/text_metrics.py
The printed numbers are frozen into tests/unit/test_eval.cpp.
"""
import string

from nltk.translate.bleu_score import corpus_bleu
from pycocoevalcap.cider.cider_scorer import CiderScorer
from pycocoevalcap.rouge.rouge import Rouge
from scipy.stats import spearmanr


def tok(s):
    s = "".join(ch for ch in s.lower() if ch not in string.punctuation)
    return s.split()


CORPORA = {
    "toy2": (
        ["The chair was moved to the left of the table.",
         "A blanket is lying on the bed now."],
        [["The chair has been moved to the left side of the table."],
         ["The blanket now lies on the bed.", "Someone put a blanket on the bed."]],
    ),
    "toy4": (
        ["Move the chair two steps back toward the desk.",
         "The lamp was removed from the shelf.",
         "Push the stool under the kitchen counter again.",
         "The cup stands on the table, near the monitor."],
        [["Move the chair back two steps so it is next to the desk."],
         ["The lamp that stood on the shelf has been removed.", "There is no lamp on the shelf anymore."],
         ["Push the stool back under the kitchen counter."],
         ["A cup is standing on the table next to the monitor."]],
    ),
}


def main():
    for name, (hyps, refs) in CORPORA.items():
        h = [tok(x) for x in hyps]
        r = [[tok(y) for y in rs] for rs in refs]
        bleu = corpus_bleu(r, h)
        rouge = Rouge()
        rl = sum(rouge.calc_score([" ".join(hh)], [" ".join(y) for y in rr]) for hh, rr in zip(h, r)) / len(h)
        cs = CiderScorer(n=4, sigma=6.0)
        for hh, rr in zip(h, r):
            cs += (" ".join(hh), [" ".join(y) for y in rr])
        cider, per_item = cs.compute_score()
        print(f"{name}: bleu4={bleu:.12f} rougeL={rl:.12f} cider={cider:.12f} "
              f"cider_items={[round(float(x), 12) for x in per_item]}")

    a = [3, 1, 4, 1, 5, 9, 2, 6]
    b = [2, 7, 1, 8, 2, 8, 1, 8]
    print(f"spearman_ties={spearmanr(a, b).correlation:.12f}")


if __name__ == "__main__":
    main()
