"""Entry point: serve one model over stdin/stdout until EOF."""

from __future__ import annotations

import argparse
import sys

import numpy as np

from . import models, protocol
from .protocol import (FrameError, TransportError, OP_EPS_PREDICT, error_frame,
                       handshake_reply, ok_frame, read_handshake, read_request)


def serve(model_id: str, stdin, stdout) -> int:
    """Handshake, then answer request frames in order until the stream ends."""
    try:
        requested = read_handshake(stdin)
    except FrameError as e:
        stdout.write(error_frame(f"handshake failed: {e}"))
        stdout.flush()
        return 1
    except TransportError:
        return 1

    if requested != model_id:
        stdout.write(error_frame(f"unknown model-id {requested!r} (serving {model_id!r})"))
        stdout.flush()
        return 1
    model = models.get(model_id)
    if model is None:
        stdout.write(error_frame(
            f"unknown model-id {model_id!r}; known: {', '.join(models.known_models())}"))
        stdout.flush()
        return 1

    stdout.write(handshake_reply(model.latent_shape))
    stdout.flush()

    while True:
        try:
            request = read_request(stdin)
        except FrameError as e:
            # frame fully consumed but invalid: report and keep serving
            stdout.write(error_frame(str(e)))
            stdout.flush()
            continue
        except TransportError as e:
            try:
                stdout.write(error_frame(str(e)))
                stdout.flush()
            except OSError:
                pass
            return 0
        if request is None:
            return 0

        opcode, timestep, dims, payload = request
        fn = model.eps_predict if opcode == OP_EPS_PREDICT else model.consistency
        if fn is None:
            stdout.write(error_frame(f"model {model_id!r} has no eps-predictor"))
            stdout.flush()
            continue
        try:
            tensor = np.frombuffer(payload, dtype="<f4").astype(np.float64).reshape(dims)
            result = np.asarray(fn(tensor, timestep), dtype=np.float64)
            if result.shape != tensor.shape:
                raise ValueError(f"model changed shape {tensor.shape} -> {result.shape}")
            stdout.write(ok_frame(dims, result.astype("<f4").tobytes()))
        except Exception as e:
            stdout.write(error_frame(f"model failure: {e}"))
        stdout.flush()


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(
        prog="prior-server",
        description="serve a consistency-model prior over the stdio wire protocol")
    ap.add_argument("model_id", help=f"one of: {', '.join(models.known_models())}, "
                                     "or a model registered via prior_server.models.register")
    args = ap.parse_args(argv)
    return serve(args.model_id, sys.stdin.buffer, sys.stdout.buffer)


if __name__ == "__main__":
    sys.exit(main())
