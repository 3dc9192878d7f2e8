# Sandbox runner. argv: script_path scratch_dir libraries(comma separated)
import sys

script_path, scratch, libs = sys.argv[1], sys.argv[2], sys.argv[3]
with open(script_path, encoding="utf-8") as fh:
    source = fh.read()

import os
import resource
import traceback

os.chdir(scratch)
namespace = {"__name__": "__main__"}
wanted = [l for l in libs.split(",") if l]
if "matplotlib" in wanted or "seaborn" in wanted:
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    namespace["matplotlib"] = matplotlib
    namespace["plt"] = plt
if "numpy" in wanted or "pandas" in wanted or "seaborn" in wanted:
    import numpy as np
    namespace["numpy"] = np
    namespace["np"] = np
if "pandas" in wanted or "seaborn" in wanted:
    import pandas as pd
    namespace["pandas"] = pd
    namespace["pd"] = pd
if "seaborn" in wanted:
    import seaborn as sns
    namespace["seaborn"] = sns
    namespace["sns"] = sns

ISOLATION_EXIT = 97
MEMORY_EXIT = 98
scratch_root = os.path.realpath(scratch)
read_roots = tuple(
    os.path.realpath(p)
    for p in {sys.prefix, sys.base_prefix, sys.exec_prefix, "/usr", *sys.path}
    if p and os.path.isabs(p)
)
readable_files = (os.path.realpath(script_path), os.path.realpath(__file__))
_write = os.write


def _inside(path, roots):
    real = os.path.realpath(path)
    return any(real == r or real.startswith(r.rstrip("/") + "/") for r in roots)


def _deny(what):
    _write(2, ("sandbox isolation violation: %s\n" % what).encode())
    os._exit(ISOLATION_EXIT)


BLOCKED_EVENTS = (
    "socket.connect", "socket.bind", "socket.sendto", "socket.sendmsg", "socket.getaddrinfo",
    "subprocess.Popen", "os.system", "os.exec", "os.posix_spawn", "os.spawn", "os.fork",
    "os.forkpty", "os.kill", "os.symlink", "os.link", "ctypes.dlopen", "urllib.Request",
)


def _hook(event, args):
    if event in BLOCKED_EVENTS:
        _deny(event)
    elif event == "open":
        path, mode, flags = args
        if isinstance(path, int):
            return
        if isinstance(path, bytes):
            path = os.fsdecode(path)
        path = os.path.join(scratch_root, path)
        writing = isinstance(mode, str) and any(c in mode for c in "wax+")
        writing = writing or (flags & (os.O_WRONLY | os.O_RDWR | os.O_CREAT | os.O_APPEND)) != 0
        if _inside(path, (scratch_root,)):
            return
        if not writing and os.path.realpath(path) in readable_files:
            return
        if writing or not _inside(path, read_roots):
            _deny("open " + path)
    elif event in ("os.remove", "os.rename", "os.rmdir", "os.mkdir", "os.chmod", "os.chdir"):
        for a in args:
            if isinstance(a, (str, bytes)) and not _inside(os.path.join(scratch_root, os.fsdecode(a)), (scratch_root,)):
                _deny(event)


sys.addaudithook(_hook)
code = compile(source, script_path, "exec")
status = 0
try:
    exec(code, namespace)
except MemoryError:
    traceback.print_exc()
    status = MEMORY_EXIT
except SystemExit as e:
    status = e.code if isinstance(e.code, int) else (0 if e.code is None else 1)
except BaseException:
    traceback.print_exc()
    status = 1
try:
    sys.stdout.flush()
    sys.stderr.flush()
except BaseException:
    pass
usage = resource.getrusage(resource.RUSAGE_SELF)
_write(2, ("\n__sandbox_usage__ %d %.3f\n" % (usage.ru_maxrss, usage.ru_utime + usage.ru_stime)).encode())
os._exit(status)
