#!/usr/bin/env python3
"""One-vs-rest linear SVM and decision-score fusion.

One binary hinge classifier per class, solved by dual coordinate
descent.  When two descriptor families describe the same image, their
per-class scores are summed and the argmax decides.
"""

import numpy as np

from texfisher import decision_values, fuse_predict, predict, train_ovr

rng = np.random.default_rng(5)

# Three classes in two "views" (think: encoding view and descriptor view).
centers_view1 = np.array([[0.0, 0.0], [6.0, 0.0], [3.0, 5.0]])
centers_view2 = np.array([[1.0, 1.0], [1.5, 1.2], [9.0, 9.0]])  # c2 easy here


def draw(centers, n_per, noise):
    xs, ys = [], []
    for c, center in enumerate(centers):
        xs.append(center + noise * rng.standard_normal((n_per, 2)))
        ys.extend([f"c{c}"] * n_per)
    return np.vstack(xs), ys


x1_train, y_train = draw(centers_view1, 40, noise=1.6)
x2_train, _ = draw(centers_view2, 40, noise=1.6)
x1_test, y_test = draw(centers_view1, 25, noise=1.6)
x2_test, _ = draw(centers_view2, 25, noise=1.6)

svm1 = train_ovr(x1_train, y_train, cost=1.0, seed=0)
svm2 = train_ovr(x2_train, y_train, cost=1.0, seed=0)


def accuracy(predictions):
    return np.mean([p == t for p, t in zip(predictions, y_test)])


only1 = [predict(svm1, r) for r in x1_test]
only2 = [predict(svm2, r) for r in x2_test]
fused = [
    fuse_predict(decision_values(svm1, r1), decision_values(svm2, r2))
    for r1, r2 in zip(x1_test, x2_test)
]
print(f"view 1 alone: {accuracy(only1):.3f}")
print(f"view 2 alone: {accuracy(only2):.3f}")
print(f"fused scores: {accuracy(fused):.3f}")

# Score vectors carry one value per class, bias included.
scores = decision_values(svm1, x1_test[0])
print("per-class scores for one sample:", np.round(scores.per_class, 3),
      "->", predict(svm1, x1_test[0]))
