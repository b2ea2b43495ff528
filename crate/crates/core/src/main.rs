fn main() {
    // CLI wiring lands once the sampler stack is in place.
}
