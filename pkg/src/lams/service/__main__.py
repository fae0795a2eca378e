"""Run the session service: python -m lams.service [--port N]."""

import argparse

import uvicorn

from .app import create_app


def main():
    parser = argparse.ArgumentParser(description="teleop mode-switching service")
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--port", type=int, default=8700)
    parser.add_argument("--log-dir", default="session_logs")
    parser.add_argument("--state-dir", default="service_state")
    args = parser.parse_args()
    app = create_app(log_dir=args.log_dir, state_dir=args.state_dir)
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")


if __name__ == "__main__":
    main()
