"""Disjoint-set forest with path compression; roots are the smallest member ids."""

from __future__ import annotations


class UnionFind:
    def __init__(self, ids=()):
        self.parent = {i: i for i in ids}

    def add(self, x):
        self.parent.setdefault(x, x)

    def find(self, x):
        self.add(x)
        root = x
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[x] != root:
            self.parent[x], x = root, self.parent[x]
        return root

    def union(self, a, b):
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return
        # keep the smaller id as root so component roots are canonical
        if rb < ra:
            ra, rb = rb, ra
        self.parent[rb] = ra

    def roots(self) -> dict:
        return {x: self.find(x) for x in self.parent}
