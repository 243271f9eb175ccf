# CSV, JSON and SVG exporters
