# Tests package for the induced-coherence toolkit
