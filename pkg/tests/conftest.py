from fracfield import configure_threads

configure_threads()
