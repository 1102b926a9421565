# Typed data shapes
