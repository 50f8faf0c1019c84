"""
No context-independent outcome assignment
=========================================

Eighteen rays in four dimensions, grouped into nine orthogonal bases. Each
ray belongs to two bases. Asking every basis to have exactly one ray valued 1
is impossible: the search below exhausts all options.
"""

from csmlab import contextuality as ks

rays = ks.cabello_18()
print(f"{rays.n_rays} rays, {len(rays.contexts)} contexts, dimension {rays.dim}")

res = ks.assignment_search(rays)
print("status:", res.status, "| nodes explored:", res.nodes)

# a counting argument explains why: nine contexts need an odd number of ones,
# but every ray is counted twice
print("contexts per ray:", {len([c for c in rays.contexts if r in c]) for r in range(rays.n_rays)})

# drop any one context and an assignment appears
sub = rays.subset(range(8))
found = ks.assignment_search(sub)
ones = sorted(r for r, v in found.assignment.items() if v)
print("with 8 contexts, rays valued 1:", ones, "| violations:", ks.check_assignment(sub, found.assignment))

print()
print(ks.verify_ks(rays))
