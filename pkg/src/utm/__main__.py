from .cli_frontend import main

main()
