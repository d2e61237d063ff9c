"""Regenerates drain_corpus.log and drain_corpus_truth.csv (fixed seed)."""
import random

rng = random.Random(20240101)

def ip(): return f"10.{rng.randrange(256)}.{rng.randrange(256)}.{rng.randrange(1, 255)}"
def num(a, b): return str(rng.randrange(a, b))
def pick(xs): return rng.choice(xs)

SERVICES = ["auth", "billing", "gateway", "scheduler", "indexer", "mailer"]
REGIONS = ["us-east-1", "eu-west-2", "ap-south-1", "sa-east-1"]
PATHS = ["/etc/app/main.yaml", "/opt/svc/conf.d/override.yaml", "/srv/config.toml", "/home/ops/app.ini"]

TEMPLATES = [
    lambda: f"Accepted connection from {ip()} port {num(1024, 65535)}",
    lambda: f"Accepted connection from {ip()}:{num(1024, 65535)}",
    lambda: f"User id {num(1000, 99999)} logged in successfully",
    lambda: f"Disk usage on /dev/sda{num(1, 9)} at {num(50, 100)}% capacity",
    lambda: f"Job job_{num(100, 9999)} finished in {num(1, 5000)} ms with status OK",
    lambda: f"Job job_{num(100, 9999)} failed with error code {num(1, 255)}",
    lambda: f"Starting service {pick(SERVICES)} on node node-{num(1, 40):0>2}",
    lambda: f"Stopping service {pick(SERVICES)} on node node-{num(1, 40):0>2}",
    lambda: f"Cache miss for key user:{num(1, 100000)} in region {pick(REGIONS)}",
    lambda: f"Cache miss while loading index idx{num(1, 500)} from {ip()}",
    lambda: f"Heartbeat received from worker {num(1, 64)} latency {num(1, 900)}ms",
    lambda: f"Configuration reloaded from {pick(PATHS)}",
]

labels = [i for i in range(len(TEMPLATES)) for _ in range(5)]
labels += [rng.randrange(len(TEMPLATES)) for _ in range(200 - len(labels))]
rng.shuffle(labels)

with open("drain_corpus.log", "w") as log, open("drain_corpus_truth.csv", "w") as truth:
    truth.write("line,template\n")
    for i, t in enumerate(labels):
        log.write(TEMPLATES[t]() + "\n")
        truth.write(f"{i},{t}\n")
