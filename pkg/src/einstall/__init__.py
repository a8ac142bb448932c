"""einstall: headless re-enactment of virtualized media-art installations.

The package simulates telepresence visits to "e-installations": declarative
scene manifests describe the artwork (geometry, media channels, projectors,
speakers, menus), a deterministic engine executes its program logic tick by
tick, a motion-compression controller folds unbounded virtual walking into a
small physical workspace, and a line-oriented protocol streams per-tick
sensory frames to clients.
"""

__version__ = "0.1.0"
