"""
A fall, its alert and the posture on the floor
==============================================

One person walks, stops and falls. The status window turns Fallen a few
ticks after the body reaches the floor, a single alert goes out, and
after thirty seconds on the ground the accumulated points are classified
into a lying or seated posture.
"""

from mmtrack.codec import decode_stream, packets
from mmtrack.config import PipelineConfig
from mmtrack.pipeline import Pipeline, run_pipeline
from mmtrack.scenarios import get
from mmtrack.simulator import simulate
from mmtrack.status import MemorySink, Notifier

sc = get("fall-4")
sc.duration = sc.actors[0].contact_times()[0] + 35.0  # long enough for a posture report
out = simulate(sc)
contact = round(sc.actors[0].contact_times()[0] * 20)
print(f"ground contact at tick {contact}")

###############################################################################
# Alerts go to every sink; a memory sink keeps them for inspection.

sink = MemorySink()
pipe = Pipeline(PipelineConfig(), Notifier([sink], asynchronous=False))
pk = sorted((p for s in out.streams.values() for p in packets(decode_stream(s))),
            key=lambda p: (p.timestamp_us, p.radar_id))
res = run_pipeline(PipelineConfig(), pk, pipeline=pipe)
for ev in res.events:
    print(f"fall alert for track {ev.track_id} at tick {ev.tick} ({ev.tick - contact:+d} ticks), "
          f"confidence {ev.confidence:.2f}")
print(f"{len(sink.records)} record(s) delivered")

###############################################################################
# Status along the way

prev = None
for r in res.rows:
    if r.status != prev:
        print(f"tick {r.tick:5d}: {r.status}")
        prev = r.status

for tr in res.results:
    for tid, rep in tr.postures:
        print(f"tick {tr.tick}: track {tid} posture {rep.posture.value}, footprint {rep.area:.2f} m^2, "
              f"height {rep.dominant_height:.2f} m")
